//! Binary eigenfunction archive and CSV tables.
//!
//! Archive layout, little endian: magic, version `u32`, `nx u64`, `ny u64`,
//! `h f64`, mask hash `u64`, pair count `u64`, then for each pair
//! `index u64, lambda f64, residual f64` followed by `nx * ny` field values.

use std::io::{Read, Write};

use super::trace::BoundaryTrace;
use super::{EigenPair, Grid, Spectrum};
use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: [u8; 8] = *b"SINAIEIG";
const VERSION: u32 = 1;

pub fn write_archive<W: Write>(mut w: W, spectrum: &Spectrum) -> Result<()> {
    let g = &spectrum.grid;
    w.write_all(&ARCHIVE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [g.nx as u64, g.ny as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&g.h.to_le_bytes())?;
    w.write_all(&g.mask_hash().to_le_bytes())?;
    w.write_all(&(spectrum.pairs.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * g.node_count());
    for p in &spectrum.pairs {
        w.write_all(&(p.index as u64).to_le_bytes())?;
        w.write_all(&p.lambda.to_le_bytes())?;
        w.write_all(&p.residual.to_le_bytes())?;
        buf.clear();
        p.field.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Archive("truncated archive".into())
    } else {
        Error::Io(e)
    }
}

/// Read an archive written for `grid`. The header must match the grid's
/// dimensions, spacing and obstacle mask.
pub fn read_archive<R: Read>(mut r: R, grid: &Grid) -> Result<Spectrum> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != ARCHIVE_MAGIC {
        return Err(Error::Archive("bad magic".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb).map_err(truncated)?;
    let version = u32::from_le_bytes(vb);
    if version != VERSION {
        return Err(Error::Archive(format!("unsupported version {version}")));
    }
    let nx = read_u64(&mut r)? as usize;
    let ny = read_u64(&mut r)? as usize;
    let h = read_f64(&mut r)?;
    let hash = read_u64(&mut r)?;
    if nx != grid.nx || ny != grid.ny || h.to_bits() != grid.h.to_bits() {
        return Err(Error::Archive(format!(
            "grid mismatch: archive {nx}x{ny} h={h}, expected {}x{} h={}",
            grid.nx, grid.ny, grid.h
        )));
    }
    if hash != grid.mask_hash() {
        return Err(Error::Archive("obstacle mask differs from the configuration".into()));
    }
    let count = read_u64(&mut r)? as usize;
    let nodes = nx * ny;
    let mut pairs = Vec::with_capacity(count.min(1 << 16));
    let mut buf = vec![0u8; 8 * nodes];
    for _ in 0..count {
        let index = read_u64(&mut r)? as usize;
        let lambda = read_f64(&mut r)?;
        let residual = read_f64(&mut r)?;
        r.read_exact(&mut buf).map_err(truncated)?;
        let field = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pairs.push(EigenPair {
            index,
            lambda,
            field,
            residual,
        });
    }
    Ok(Spectrum {
        grid: grid.clone(),
        pairs,
    })
}

/// `index,lambda,eigenvalue,residual,sup_norm` per mode.
pub fn write_eigen_table<W: Write>(mut w: W, spectrum: &Spectrum) -> Result<()> {
    writeln!(w, "index,lambda,eigenvalue,residual,sup_norm")?;
    for p in &spectrum.pairs {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.3e},{:.6e}",
            p.index,
            p.lambda,
            p.eigenvalue(),
            p.residual,
            p.sup_norm()
        )?;
    }
    Ok(())
}

/// `mode,component,s,value` for each trace sample.
pub fn write_traces_csv<'a, W, I>(mut w: W, traces: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a [BoundaryTrace])>,
{
    writeln!(w, "mode,component,s,value")?;
    for (mode, ts) in traces {
        for t in ts {
            for s in &t.samples {
                writeln!(w, "{mode},{},{:.9e},{:.9e}", t.component, s.s, s.value)?;
            }
        }
    }
    Ok(())
}

//! Flat binary parameter snapshots.
//!
//! One record per network: magic `FSN1`, a u32 layer count `L`, `L + 1`
//! u32 layer sizes, then per layer the row-major f64 little-endian weight
//! matrix followed by the bias vector. A file may hold several records
//! back to back (multi-network modules write one record per network).
//! Activations are not stored; the loading module supplies them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Tensor};

pub const MAGIC: &[u8; 4] = b"FSN1";

pub fn write_record<W: Write>(w: &mut W, mlp: &Mlp) -> Result<()> {
    w.write_all(MAGIC)?;
    let n_layers = mlp.weights().len() as u32;
    w.write_all(&n_layers.to_le_bytes())?;
    for &s in mlp.sizes() {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for l in 0..mlp.weights().len() {
        for v in mlp.weights()[l].data() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in mlp.biases()[l].data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_record<R: Read>(r: &mut R, activations: &[Activation]) -> Result<Mlp> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad snapshot magic {magic:?}")));
    }
    let n_layers = read_u32(r)? as usize;
    if n_layers != activations.len() {
        return Err(Error::Format(format!(
            "snapshot has {n_layers} layers, expected {}",
            activations.len()
        )));
    }
    let mut sizes = Vec::with_capacity(n_layers + 1);
    for _ in 0..=n_layers {
        sizes.push(read_u32(r)? as usize);
    }
    let mut weights = Vec::with_capacity(n_layers);
    let mut biases = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let w = read_f64_vec(r, fan_in * fan_out)?;
        let b = read_f64_vec(r, fan_out)?;
        weights.push(Tensor::new(vec![fan_out, fan_in], w)?);
        biases.push(Tensor::new(vec![fan_out], b)?);
    }
    Mlp::from_parts(sizes, weights, biases, activations.to_vec())
}

/// Writes a multi-record snapshot file.
pub fn write_file(path: &Path, mlps: &[&Mlp]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for mlp in mlps {
        write_record(&mut w, mlp)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a multi-record snapshot file; one activation spec per record.
pub fn read_file(path: &Path, specs: &[&[Activation]]) -> Result<Vec<Mlp>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        out.push(read_record(&mut r, spec)?);
    }
    // Trailing bytes mean the file does not match the expected module layout.
    let mut rest = [0u8; 1];
    match r.read(&mut rest)? {
        0 => Ok(out),
        _ => Err(Error::Format("snapshot file has trailing data".into())),
    }
}

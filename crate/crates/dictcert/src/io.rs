//! DLMAT1 matrix files and instance directories.
//!
//! DLMAT1 is an ASCII header `DLMAT1 <rows> <cols>\n` followed by the
//! entries in row-major order as little-endian f64.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dictionary;
use crate::model::{observe, Instance, SparseCoeffs};

const MODULE: &str = "io";
const MAGIC: &str = "DLMAT1";

pub fn encode_dlmat(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = format!("{MAGIC} {} {}\n", m.nrows(), m.ncols()).into_bytes();
    out.reserve(8 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_dlmat(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::validation(MODULE, "DLMAT1 header has no newline"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::validation(MODULE, "DLMAT1 header is not ASCII"))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::validation(MODULE, "missing DLMAT1 magic"));
    }
    let mut dim = || -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::validation(MODULE, format!("bad DLMAT1 header '{header}'")))
    };
    let (rows, cols) = (dim()?, dim()?);
    let body = &bytes[nl + 1..];
    if body.len() != 8 * rows * cols {
        return Err(Error::validation(
            MODULE,
            format!("DLMAT1 body has {} bytes, expected {}", body.len(), 8 * rows * cols),
        ));
    }
    let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = vals.next().expect("length checked");
        }
    }
    Ok(m)
}

pub fn write_dlmat(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_dlmat(m))?;
    Ok(())
}

pub fn read_dlmat(path: &Path) -> Result<DMatrix<f64>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_dlmat(&buf).map_err(|e| match e {
        Error::Validation { msg, .. } => Error::validation(MODULE, format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// JSON sidecar stored next to the three matrices.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub sigma: f64,
    pub mu: f64,
}

pub fn write_instance(dir: &Path, inst: &Instance, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dlmat(&dir.join("A.mat"), inst.dict.entries())?;
    write_dlmat(&dir.join("X.mat"), inst.coeffs.dense())?;
    write_dlmat(&dir.join("Y.mat"), &inst.obs)?;
    let side = Sidecar {
        n: inst.dict.n(),
        m: inst.dict.m(),
        p: inst.coeffs.p(),
        k: inst.coeffs.k(),
        seed,
        sigma: inst.coeffs.sigma(),
        mu: inst.dict.mu(),
    };
    fs::write(dir.join("instance.json"), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

pub fn read_instance(dir: &Path) -> Result<(Instance, Sidecar)> {
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join("instance.json"))?)?;
    let a = Dictionary::new(read_dlmat(&dir.join("A.mat"))?)?;
    let x = read_dlmat(&dir.join("X.mat"))?;
    let y = read_dlmat(&dir.join("Y.mat"))?;
    if a.m() != side.m || a.n() != side.n || x.shape() != (side.n, side.p) {
        return Err(Error::validation(MODULE, "matrix shapes disagree with instance.json"));
    }
    let coeffs = SparseCoeffs::from_dense(&x, side.k)?;
    let inst = observe(&a, &coeffs)?;
    let scale = y.norm().max(1.0);
    if (&inst.obs - &y).norm() > 1e-12 * scale {
        return Err(Error::validation(MODULE, "Y.mat does not equal A·X"));
    }
    Ok((Instance { obs: y, ..inst }, side))
}

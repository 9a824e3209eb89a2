//! Flat binary parameter container.
//!
//! Layout: the 8-byte magic `SSPARAM1`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then every weight as a little-endian `f64` in
//! [`NetworkParams::to_flat`] order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Activation, NetworkParams};
use crate::numkit::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SSPARAM1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub shapes: Vec<(usize, usize)>,
    pub prefactors: Vec<f64>,
    pub activation: Activation,
    pub parameterization: String,
    pub seed: Option<u64>,
}

pub fn write_params(
    out: &mut impl Write,
    params: &NetworkParams,
    seed: Option<u64>,
) -> std::io::Result<()> {
    let header = CheckpointHeader {
        shapes: params.shapes(),
        prefactors: params.prefactors.clone(),
        activation: params.activation,
        parameterization: "ntp".into(),
        seed,
    };
    let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for x in params.to_flat() {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params(input: &mut impl Read) -> Result<(NetworkParams, CheckpointHeader)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::Format {
        offset: 0,
        message: e.to_string(),
    })?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "missing SSPARAM1 magic".into(),
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = 12 + hlen;
    if bytes.len() < body {
        return Err(Error::Format {
            offset: 12,
            message: "truncated header".into(),
        });
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[12..body]).map_err(|e| Error::Format {
            offset: 12,
            message: e.to_string(),
        })?;
    let count: usize = header.shapes.iter().map(|(r, c)| r * c).sum();
    if bytes.len() != body + 8 * count {
        return Err(Error::Format {
            offset: body,
            message: format!(
                "expected {count} weights, found {} bytes",
                bytes.len() - body
            ),
        });
    }
    let mut offset = body;
    let mut layers = Vec::with_capacity(header.shapes.len());
    for &(r, c) in &header.shapes {
        let data = bytes[offset..offset + 8 * r * c]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        offset += 8 * r * c;
        layers.push(Matrix::from_vec(r, c, data)?);
    }
    let params = NetworkParams::new(layers, header.prefactors.clone(), header.activation)?;
    Ok((params, header))
}

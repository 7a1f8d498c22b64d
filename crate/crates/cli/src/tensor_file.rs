//! Binary tensor files: an ASCII header `KTEN <ndim> <d1> <d2> [<d3>]\n`
//! followed by the entries in vec order as little-endian `f64`.

use std::fs;
use std::path::Path;

use kronpcg::{DenseTensor, Shape};

use crate::error::{CliError, CliResult};

const MAGIC: &str = "KTEN";

pub fn header(shape: Shape) -> String {
    let dims: Vec<String> = shape.dims().iter().map(|d| d.to_string()).collect();
    format!("{MAGIC} {} {}\n", shape.ndim(), dims.join(" "))
}

pub fn encode(t: &DenseTensor) -> Vec<u8> {
    let head = header(t.shape());
    let mut out = Vec::with_capacity(head.len() + 8 * t.vec().len());
    out.extend_from_slice(head.as_bytes());
    for v in t.vec() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DenseTensor, String> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("missing header line")?;
    let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not ASCII")?;
    let mut fields = head.split(' ');
    if fields.next() != Some(MAGIC) {
        return Err(format!("expected `{MAGIC}` magic"));
    }
    let nums: Vec<usize> = fields
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| format!("bad header field `{f}`"))
        })
        .collect::<Result<_, _>>()?;
    let (&ndim, dims) = nums.split_first().ok_or("missing ndim")?;
    if dims.len() != ndim {
        return Err(format!(
            "header declares {ndim} dims but lists {}",
            dims.len()
        ));
    }
    let shape = Shape::new(dims).map_err(|e| e.to_string())?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * shape.len() {
        return Err(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            8 * shape.len()
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseTensor::unvec(data, shape).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> CliResult<DenseTensor> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|reason| CliError::TensorFormat {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write(path: &Path, t: &DenseTensor) -> CliResult<()> {
    write_atomic(path, &encode(t))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

//! Files holding one or more concatenated `OVSRT1` tensor dumps.

use std::fs;
use std::path::Path;

use ovsr_core::tensor::{decode_tensors, encode_tensor};
use ovsr_core::Tensor;

use crate::error::{Error, Result};

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<()> {
    let mut buf = Vec::new();
    for t in tensors {
        encode_tensor(t, &mut buf);
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_tensors(&bytes)?)
}

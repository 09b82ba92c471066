//! Binary dense-matrix files: 8-byte magic, `u32` rows, `u32` cols, then the
//! entries as row-major little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"PRXMAT01";

pub fn write_matrix<W: Write>(mut out: W, m: ArrayView2<'_, f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let rows = u32::try_from(rows).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(cols).map_err(|_| Error::Format("too many cols".into()))?;
    out.write_all(&MAGIC)?;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<Array2<f64>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format("bad matrix magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let rows = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u32::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        input.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_matrix(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), m)
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    read_matrix(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_layout() {
        let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, m.view()).unwrap();
        assert_eq!(&bytes[..8], b"PRXMAT01");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 8);
        // row-major: second value is m[0][1]
        assert_eq!(&bytes[24..32], &2.0f64.to_le_bytes());
        assert_eq!(read_matrix(&bytes[..]).unwrap(), m);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"NOTAMAT!\x01\0\0\0\x01\0\0\0\0\0\0\0\0\0\0\0";
        assert!(matches!(read_matrix(&bytes[..]), Err(Error::Format(_))));
    }
}

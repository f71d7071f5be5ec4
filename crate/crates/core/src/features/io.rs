//! Binary feature files: a 16-byte little-endian header (`VADF`, version,
//! rows, dim) followed by row-major `f32` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VADF";
pub const VERSION: u32 = 1;

pub fn encode(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.values.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a feature file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(Error::Format(format!("unsupported feature file version {}", word(4))));
    }
    let (rows, dim) = (word(8) as usize, word(12) as usize);
    if bytes.len() != 16 + 4 * rows * dim {
        return Err(Error::Format(format!(
            "expected {} bytes of data for {rows}x{dim}, found {}",
            4 * rows * dim,
            bytes.len() - 16
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureMatrix::unlabeled(Array2::from_shape_vec((rows, dim), data).expect("sized")))
}

pub fn write_features(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(m)).map_err(|e| Error::Io(e).at(path))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Io(e).at(path))?;
    decode(&bytes).map_err(|e| e.at(path))
}

/// Debug export, one frame per line, with a trailing label column when present.
pub fn write_features_csv(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let write = || -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        for (i, row) in m.values.rows().into_iter().enumerate() {
            let mut line = row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
            if let Some(l) = &m.labels {
                line.push(',');
                line.push(l[i].as_char());
            }
            writeln!(f, "{line}")?;
        }
        f.flush()?;
        Ok(())
    };
    write().map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_at_f32_precision(rows in 0usize..6, dim in 1usize..10, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * dim).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64 - 500.0) / 7.0).collect();
            let m = FeatureMatrix::unlabeled(Array2::from_shape_vec((rows, dim), data).unwrap());
            let back = decode(&encode(&m)).unwrap();
            prop_assert_eq!(back.values.dim(), (rows, dim));
            for (a, b) in m.values.iter().zip(back.values.iter()) {
                prop_assert_eq!(*a as f32, *b as f32);
            }
        }
    }

    #[test]
    fn header_layout_and_corruption() {
        let m = FeatureMatrix::unlabeled(Array2::zeros((2, 3)));
        let bytes = encode(&m);
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(&bytes[..4], b"VADF");
        assert!(decode(&bytes[..30]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }
}

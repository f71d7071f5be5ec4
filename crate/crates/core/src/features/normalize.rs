//! Per-dimension min-max scaling to `[0, 1]` and corpus centroids.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Axis};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Which corpora the statistics came from.
    pub source: String,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.min[j] == self.max[j]
    }

    /// Scales into `[0, 1]`, clamping values outside the fitted range.
    /// Constant dimensions map to 0.5.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.dim() });
        }
        let mut values = m.values.clone();
        for mut row in values.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale(j, *v);
            }
        }
        Ok(FeatureMatrix { values, labels: m.labels.clone() })
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi == lo {
            0.5
        } else {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn apply_slice(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: row.len() });
        }
        for (j, v) in row.iter_mut().enumerate() {
            *v = self.scale(j, *v);
        }
        Ok(())
    }

    /// CSV with a `# fit on:` comment line and `dim,min,max` rows.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let write = || -> Result<()> {
            let mut f = File::create(path)?;
            writeln!(f, "# fit on: {}", self.source.replace('\n', " "))?;
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["dim", "min", "max"])?;
            for j in 0..self.dim() {
                w.write_record([j.to_string(), format!("{:e}", self.min[j]), format!("{:e}", self.max[j])])?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| e.at(path))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let read = || -> Result<Normalizer> {
            let text = std::fs::read_to_string(path)?;
            let source = text
                .lines()
                .next()
                .and_then(|l| l.strip_prefix("# fit on: "))
                .unwrap_or("")
                .to_string();
            let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
            let (mut min, mut max) = (Vec::new(), Vec::new());
            for (i, rec) in r.records().enumerate() {
                let rec = rec?;
                let field = |k: usize| -> Result<f64> {
                    rec.get(k)
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| Error::Format(format!("row {i}: bad field {k}")))
                };
                if field(0)? as usize != i {
                    return Err(Error::Format(format!("row {i}: dimensions out of order")));
                }
                min.push(field(1)?);
                max.push(field(2)?);
            }
            if min.is_empty() {
                return Err(Error::Format("normalizer has no rows".into()));
            }
            if min.iter().zip(&max).any(|(a, b)| a > b) {
                return Err(Error::Format("min exceeds max".into()));
            }
            Ok(Normalizer { min, max, source })
        };
        read().map_err(|e| e.at(path))
    }
}

/// Per-dimension min and max over every row of every matrix.
pub fn fit_normalizer(matrices: &[&FeatureMatrix], source: impl Into<String>) -> Result<Normalizer> {
    let dim = matrices.first().map(|m| m.dim()).ok_or(Error::Empty("no matrices to fit"))?;
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    let mut rows = 0;
    for m in matrices {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
        }
        for row in m.values.rows() {
            rows += 1;
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
    }
    if rows == 0 {
        return Err(Error::Empty("no rows to fit normalizer"));
    }
    Ok(Normalizer { min, max, source: source.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub values: Vec<f64>,
}

pub fn compute_centroid(m: &FeatureMatrix) -> Result<Centroid> {
    if m.is_empty() {
        return Err(Error::Empty("centroid of empty matrix"));
    }
    let mean: Array1<f64> = m.values.sum_axis(Axis(0)) / m.rows() as f64;
    Ok(Centroid { values: mean.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn col(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::unlabeled(ndarray::Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap())
    }

    #[test]
    fn fit_and_apply() {
        let m = col(&[2.0, 4.0, 6.0]);
        let n = fit_normalizer(&[&m], "x").unwrap();
        assert_eq!((n.min[0], n.max[0]), (2.0, 6.0));
        let out = n.apply(&m).unwrap();
        assert_eq!(out.values.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.apply(&col(&[8.0, 0.0])).unwrap().values.column(0).to_vec(), vec![1.0, 0.0]);
        let single = fit_normalizer(&[&col(&[3.0])], "x").unwrap();
        assert!(single.is_constant(0));
        assert_eq!(single.apply(&col(&[1.0, 9.0])).unwrap().values.column(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_normalizer(&[], "x").is_err());
        assert!(fit_normalizer(&[&FeatureMatrix::empty(3)], "x").is_err());
        let n = fit_normalizer(&[&col(&[1.0, 2.0])], "x").unwrap();
        let wide = FeatureMatrix::unlabeled(array![[1.0, 2.0]]);
        assert!(matches!(n.apply(&wide), Err(Error::DimensionMismatch { expected: 1, found: 2 })));
    }

    #[test]
    fn fit_is_order_independent() {
        let a = FeatureMatrix::unlabeled(array![[1.0, -3.0], [5.0, 0.5]]);
        let b = FeatureMatrix::unlabeled(array![[-2.0, 9.0], [4.0, 1.0], [0.0, 0.0]]);
        let joined = FeatureMatrix::concat(&[&b, &a]).unwrap();
        let sep = fit_normalizer(&[&a, &b], "").unwrap();
        let cat = fit_normalizer(&[&joined], "").unwrap();
        assert_eq!((sep.min, sep.max), (cat.min, cat.max));
    }

    #[test]
    fn centroid() {
        let m = FeatureMatrix::unlabeled(array![[0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(compute_centroid(&m).unwrap().values, vec![0.5, 0.5]);
        let one = FeatureMatrix::unlabeled(array![[0.25, 0.75]]);
        assert_eq!(compute_centroid(&one).unwrap().values, vec![0.25, 0.75]);
        assert!(compute_centroid(&FeatureMatrix::empty(2)).is_err());

        // streaming one-pass mean
        let rows: Vec<Vec<f64>> = (0..500).map(|i| vec![(i as f64 * 0.618).fract(), (i as f64 * 0.377).fract()]).collect();
        let m = FeatureMatrix::from_rows(&rows, 2).unwrap();
        let mut running = [0.0, 0.0];
        for (k, r) in rows.iter().enumerate() {
            for j in 0..2 {
                running[j] += (r[j] - running[j]) / (k + 1) as f64;
            }
        }
        let c = compute_centroid(&m).unwrap();
        for j in 0..2 {
            assert!((c.values[j] - running[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.csv");
        let n = Normalizer { min: vec![-1.5, 0.1, 3.0], max: vec![2.0, 0.1, 1e9], source: "street/train".into() };
        n.save_csv(&path).unwrap();
        assert_eq!(Normalizer::load_csv(&path).unwrap(), n);
    }
}

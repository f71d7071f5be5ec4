//! Frame accuracy, centroid similarity between corpora, and reports.

pub mod hinton;
pub mod report;

pub use hinton::{emit_hinton_svg, render_hinton_svg};
pub use report::{emit_result_table, render_text, render_timings, CellSummary, CellKey, ReportFormat, ResultTable, RunRecord};

use crate::error::{Error, Result};
use crate::features::{compute_centroid, fit_normalizer, Centroid, FeatureMatrix};
use crate::signal::Label;

/// Percentage of frames where `predicted` agrees with `reference`.
pub fn accuracy(predicted: &[Label], reference: &[Label]) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), found: predicted.len() });
    }
    if reference.is_empty() {
        return Err(Error::Empty("no frames to score"));
    }
    let hits = predicted.iter().zip(reference).filter(|(p, r)| p == r).count();
    Ok(100.0 * hits as f64 / reference.len() as f64)
}

/// `exp(-|a - b|^2 / 2)`.
pub fn similarity(a: &Centroid, b: &Centroid) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch { expected: a.values.len(), found: b.values.len() });
    }
    let d2: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-d2 / 2.0).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn from_centroids(names: Vec<String>, centroids: &[Centroid]) -> Result<Self> {
        if names.len() != centroids.len() {
            return Err(Error::DimensionMismatch { expected: centroids.len(), found: names.len() });
        }
        let n = centroids.len();
        let mut values = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s = similarity(&centroids[i], &centroids[j])?;
                values[i][j] = s;
                values[j][i] = s;
            }
        }
        Ok(SimilarityMatrix { names, values })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("corpus");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise centroid similarity of raw (unnormalized) corpora, all scaled by
/// one normalizer fit on their union.
pub fn similarity_matrix(names: &[String], corpora: &[&FeatureMatrix]) -> Result<SimilarityMatrix> {
    if corpora.len() < 2 {
        return Err(Error::Insufficient(format!(
            "similarity needs at least two corpora, got {}",
            corpora.len()
        )));
    }
    let norm = fit_normalizer(corpora, names.join("+"))?;
    let centroids = corpora
        .iter()
        .map(|m| compute_centroid(&norm.apply(m)?))
        .collect::<Result<Vec<_>>>()?;
    SimilarityMatrix::from_centroids(names.to_vec(), &centroids)
}

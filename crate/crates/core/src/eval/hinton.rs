//! Hinton-style SVG of a similarity matrix: one square per cell whose side
//! is proportional to the similarity value.

use std::fmt::Write as _;
use std::path::Path;

use super::SimilarityMatrix;
use crate::error::{Error, Result};

pub const CELL: f64 = 48.0;
const MARGIN: f64 = 110.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Side length of the square drawn for a similarity value.
pub fn square_side(value: f64) -> f64 {
    0.9 * CELL * value
}

pub fn render_hinton_svg(m: &SimilarityMatrix) -> Result<String> {
    let n = m.len();
    if n == 0 || m.values.len() != n || m.values.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidConfig("similarity matrix must be square and non-empty".into()));
    }
    if m.values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0 && *v <= 1.0)) {
        return Err(Error::InvalidConfig("similarity values must lie in [0, 1]".into()));
    }
    let size = MARGIN + CELL * n as f64 + 10.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .unwrap();
    writeln!(s, r##"<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>"##).unwrap();
    writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="#d8d8d8"/>"##,
        w = CELL * n as f64
    )
    .unwrap();
    for (i, name) in m.names.iter().enumerate() {
        let c = MARGIN + CELL * (i as f64 + 0.5);
        let name = escape(name);
        writeln!(
            s,
            r#"<text class="row-label" x="{x}" y="{c}" font-size="12" text-anchor="end" dominant-baseline="middle">{name}</text>"#,
            x = MARGIN - 6.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text class="col-label" x="{c}" y="{y}" font-size="12" text-anchor="start" transform="rotate(-45 {c} {y})">{name}</text>"#,
            y = MARGIN - 6.0
        )
        .unwrap();
    }
    for i in 0..n {
        for j in 0..n {
            let v = m.values[i][j];
            let side = square_side(v);
            let cx = MARGIN + CELL * (j as f64 + 0.5);
            let cy = MARGIN + CELL * (i as f64 + 0.5);
            writeln!(
                s,
                r##"<rect class="cell" data-row="{i}" data-col="{j}" x="{x}" y="{y}" width="{side}" height="{side}" fill="#ffffff"><title>{a} / {b}: {v:.4}</title></rect>"##,
                x = cx - side / 2.0,
                y = cy - side / 2.0,
                a = escape(&m.names[i]),
                b = escape(&m.names[j]),
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_hinton_svg(m: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_hinton_svg(m)?;
    let path = path.as_ref();
    std::fs::write(path, svg).map_err(|e| Error::from(e).at(path))
}

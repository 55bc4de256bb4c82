//! Minimal scatter plots as standalone SVG.

use std::fmt::Write as _;

use nalgebra::DMatrix;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn xy(points: &DMatrix<f64>, i: usize) -> (f64, f64) {
    let x = points[(i, 0)];
    let y = if points.ncols() > 1 { points[(i, 1)] } else { 0.0 };
    (x, y)
}

/// Scatter of the first two columns of `points`, colored by `labels` when
/// given. `overlay` (same shape) is drawn as hollow circles, for example a
/// ground-truth configuration aligned onto the embedding.
pub fn scatter(title: &str, points: &DMatrix<f64>, labels: Option<&[u8]>, overlay: Option<&DMatrix<f64>>) -> String {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for m in std::iter::once(points).chain(overlay) {
        for i in 0..m.nrows() {
            let (x, y) = xy(m, i);
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
    }
    // Equal scaling on both axes so rigid shapes keep their aspect ratio.
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
    let mid = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let inner = SIZE - 2.0 * MARGIN;
    let map = |(x, y): (f64, f64)| {
        (SIZE / 2.0 + (x - mid.0) / span * inner, SIZE / 2.0 - (y - mid.1) / span * inner)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let (ox, oy) = map((0.0, 0.0));
    let (x0, y0, x1) = (MARGIN / 2.0, SIZE - MARGIN / 2.0, SIZE - MARGIN / 2.0);
    let _ = writeln!(svg, r##"<line x1="{x0}" y1="{oy:.2}" x2="{x1}" y2="{oy:.2}" stroke="#bbb"/>"##);
    let _ = writeln!(svg, r##"<line x1="{ox:.2}" y1="{x0}" x2="{ox:.2}" y2="{y0}" stroke="#bbb"/>"##);
    if let Some(m) = overlay {
        for i in 0..m.nrows() {
            let (cx, cy) = map(xy(m, i));
            let _ = writeln!(svg, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="6" fill="none" stroke="#444"/>"##);
        }
    }
    for i in 0..points.nrows() {
        let (cx, cy) = map(xy(points, i));
        let color = labels.map_or(PALETTE[0], |l| PALETTE[l[i] as usize % PALETTE.len()]);
        let _ = writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

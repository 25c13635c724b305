//! Color-mapped matrix heatmaps.

use std::fmt::Write as _;

use descrambler_core::DenseMatrix;

/// Diverging blue–white–red map on `[-1, 1]`.
fn color(x: f64) -> (u8, u8, u8) {
    let x = x.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if x >= 0.0 {
        (255, fade(x), fade(x))
    } else {
        (fade(-x), fade(-x), 255)
    }
}

/// One `<rect>` per matrix entry, row 0 at the top, colors scaled by the
/// largest magnitude.
pub fn heatmap(m: &DenseMatrix, cell: u32) -> String {
    let (rows, cols) = m.shape();
    let scale = m.max_abs();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" shape-rendering=\"crispEdges\">\n",
        cols as u64 * cell as u64,
        rows as u64 * cell as u64
    );
    for i in 0..rows {
        for j in 0..cols {
            let v = if scale > 0.0 { m.get(i, j) / scale } else { 0.0 };
            let (r, g, b) = color(v);
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"#{r:02x}{g:02x}{b:02x}\"/>",
                j as u64 * cell as u64,
                i as u64 * cell as u64
            )
            .expect("writing to a String");
        }
    }
    out.push_str("</svg>\n");
    out
}

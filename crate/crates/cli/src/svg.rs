//! Minimal standalone SVG charts: polyline plots for curves and columns for
//! histograms. No styling knobs; these are quick-look companions to the CSVs.

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> String {
    let mut s = format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"#999\"/>\n",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (v, x) in [(x_lo, MARGIN), (x_hi, W - MARGIN)] {
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{v:.3}</text>\n",
            H - MARGIN + 16.0
        ));
    }
    for (v, y) in [(y_lo, H - MARGIN), (y_hi, MARGIN)] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{v:.3}</text>\n",
            MARGIN - 6.0
        ));
    }
    s
}

/// Line chart: one x column, several named y series.
pub fn line_chart(title: &str, x: &[f64], series: &[(&str, Vec<f64>)]) -> String {
    let (x_lo, x_hi) = range(x.iter().copied());
    let (y_lo, y_hi) = range(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);
    let mut out = header(title);
    out.push_str(&axes(x_lo, x_hi, y_lo, y_hi));
    for (idx, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| format!("{:.2},{:.2}", sx(*a), sy(*b)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{name}</text>\n",
            W - MARGIN - 120.0,
            MARGIN + 14.0 * (idx as f64 + 1.0)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Column chart for a histogram, with an optional overlay curve.
pub fn column_chart(
    title: &str,
    centers: &[f64],
    heights: &[f64],
    overlay: Option<(&[f64], &[f64])>,
) -> String {
    let (x_lo, x_hi) = range(centers.iter().copied());
    let mut y_vals: Vec<f64> = heights.to_vec();
    if let Some((_, ys)) = overlay {
        y_vals.extend_from_slice(ys);
    }
    let (_, y_hi) = range(y_vals.iter().copied());
    let y_lo = 0.0;
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);
    let bar_w = if centers.len() > 1 {
        (sx(centers[1]) - sx(centers[0])).abs() * 0.9
    } else {
        20.0
    };
    let mut out = header(title);
    out.push_str(&axes(x_lo, x_hi, y_lo, y_hi));
    for (c, h) in centers.iter().zip(heights) {
        out.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n",
            sx(*c) - bar_w / 2.0,
            sy(*h),
            bar_w,
            (sy(0.0) - sy(*h)).max(0.0)
        ));
    }
    if let Some((xs, ys)) = overlay {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(a, b)| format!("{:.2},{:.2}", sx(*a), sy(*b)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}

//! Minimal standalone SVG charts. CSV stays the source of truth; these are
//! only for looking at.

use std::fmt::Write as _;

use crate::spectra::Histogram;

const MARGIN: f64 = 40.0;

fn header(width: u32, height: u32, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Bar chart of a histogram. `overlay`, if given, is a density curve in the
/// same x units, scaled so its area matches the histogram's.
pub fn histogram_svg(
    hist: &Histogram,
    width: u32,
    height: u32,
    title: &str,
    overlay: Option<&dyn Fn(f64) -> f64>,
) -> String {
    let mut s = header(width, height, title);
    let (w, h) = (width as f64 - 2.0 * MARGIN, height as f64 - 2.0 * MARGIN);
    let lo = hist.bin_edges[0];
    let hi = *hist.bin_edges.last().unwrap();
    let bin_w = (hi - lo) / hist.counts.len() as f64;
    let total = hist.total().max(1) as f64;
    let mut ymax = hist.counts.iter().copied().max().unwrap_or(0) as f64;
    if let Some(f) = overlay {
        for i in 0..=200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            ymax = ymax.max(f(x) * total * bin_w);
        }
    }
    let ymax = ymax.max(1.0);
    let px = |x: f64| MARGIN + (x - lo) / (hi - lo) * w;
    let py = |y: f64| MARGIN + h - y / ymax * h;
    for (i, &c) in hist.counts.iter().enumerate() {
        let x0 = px(hist.bin_edges[i]);
        let x1 = px(hist.bin_edges[i + 1]);
        let y = py(c as f64);
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4a78b5" stroke="white" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (MARGIN + h - y).max(0.0)
        );
    }
    if let Some(f) = overlay {
        let pts: Vec<String> = (0..=200)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                format!("{:.2},{:.2}", px(x), py(f(x) * total * bin_w))
            })
            .collect();
        let _ =
            writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##, pts.join(" "));
    }
    axes(&mut s, width, height, lo, hi);
    s.push_str("</svg>\n");
    s
}

/// Scatter of `(index, value)` pairs, with an optional second series
/// drawn as hollow markers.
pub fn ladder_svg(values: &[f64], reference: Option<&[f64]>, width: u32, height: u32, title: &str) -> String {
    let mut s = header(width, height, title);
    let (w, h) = (width as f64 - 2.0 * MARGIN, height as f64 - 2.0 * MARGIN);
    let count = values.len().max(reference.map_or(0, |r| r.len())).max(2);
    let ymax = values.iter().chain(reference.unwrap_or(&[])).copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let px = |i: usize| MARGIN + i as f64 / (count - 1) as f64 * w;
    let py = |y: f64| MARGIN + h - y / ymax * h;
    for (i, &v) in values.iter().enumerate() {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#4a78b5"/>"##, px(i), py(v));
    }
    if let Some(r) = reference {
        for (i, &v) in r.iter().enumerate() {
            let _ =
                writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="#c0392b"/>"##, px(i), py(v));
        }
    }
    axes(&mut s, width, height, 0.0, (count - 1) as f64);
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, width: u32, height: u32, lo: f64, hi: f64) {
    let (x0, y0) = (MARGIN, height as f64 - MARGIN);
    let x1 = width as f64 - MARGIN;
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{MARGIN}" x2="{x0}" y2="{y0}" stroke="black"/>"#);
    for (x, label) in [(x0, lo), (x1, hi)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{label:.3}</text>"#,
            y0 + 15.0
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{make_histogram, semicircle_density, Spectrum, SpectrumKind};

    #[test]
    fn svg_is_well_formed_enough() {
        let s = Spectrum { values: vec![-1.0, 0.0, 0.5, 1.0], kind: SpectrumKind::Eigen, n: 4 };
        let h = make_histogram(&s, 4, Some((-2.0, 2.0))).unwrap();
        let svg = histogram_svg(&h, 400, 300, "a <b>", Some(&semicircle_density));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 4);
        assert!(svg.contains("a &lt;b&gt;"));
        let l = ladder_svg(&[1.0, 0.5], Some(&[0.9, 0.4]), 200, 100, "x");
        assert_eq!(l.matches("<circle").count(), 4);
    }
}

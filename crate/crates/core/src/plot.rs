//! Dependency-free SVG scatter plots.

use std::fmt::Write;

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

#[derive(Debug, Clone)]
pub struct ScatterStyle {
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    pub title: Option<String>,
}

impl Default for ScatterStyle {
    fn default() -> Self {
        Self { width: 640.0, height: 480.0, radius: 3.0, title: None }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One `<circle class="point">` per row of `points` (N x 2) and one
/// `<g class="legend-entry">` per distinct label, in first-seen order.
pub fn scatter_svg(points: &[f64], labels: &[usize], names: &[String], style: &ScatterStyle) -> String {
    let n = labels.len().min(points.len() / 2);
    let legend_w = 140.0;
    let pad = 20.0;
    let (w, h) = (style.width, style.height);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        x0 = x0.min(points[2 * i]);
        x1 = x1.max(points[2 * i]);
        y0 = y0.min(points[2 * i + 1]);
        y1 = y1.max(points[2 * i + 1]);
    }
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let (sx, sy) = ((w - legend_w - 2.0 * pad) / span(x0, x1), (h - 2.0 * pad) / span(y0, y1));
    let mut seen: Vec<usize> = Vec::new();
    for &l in &labels[..n] {
        if !seen.contains(&l) {
            seen.push(l);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if let Some(t) = &style.title {
        let _ = writeln!(out, r#"<text x="{pad}" y="14" font-size="12">{}</text>"#, escape(t));
    }
    for i in 0..n {
        let cx = pad + (points[2 * i] - x0) * sx;
        let cy = h - pad - (points[2 * i + 1] - y0) * sy;
        let l = labels[i];
        let _ = writeln!(
            out,
            r#"<circle class="point" data-label="{l}" cx="{cx:.2}" cy="{cy:.2}" r="{}" fill="{}"/>"#,
            style.radius,
            PALETTE[l % PALETTE.len()]
        );
    }
    for (k, &l) in seen.iter().enumerate() {
        let y = pad + 18.0 * k as f64;
        let x = w - legend_w + 10.0;
        let name = names.get(l).cloned().unwrap_or_else(|| l.to_string());
        let _ = writeln!(
            out,
            r#"<g class="legend-entry"><circle cx="{x}" cy="{y}" r="5" fill="{}"/><text x="{}" y="{}" font-size="11">{}</text></g>"#,
            PALETTE[l % PALETTE.len()],
            x + 10.0,
            y + 4.0,
            escape(&name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_marker_per_point_one_legend_per_label() {
        let pts: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let labels = vec![0, 1, 2, 1, 0, 2, 2, 1, 0, 0];
        let names: Vec<String> = ["a", "b<", "c"].iter().map(|s| s.to_string()).collect();
        let svg = scatter_svg(&pts, &labels, &names, &ScatterStyle::default());
        assert_eq!(svg.matches(r#"class="point""#).count(), 10);
        assert_eq!(svg.matches(r#"class="legend-entry""#).count(), 3);
        assert!(svg.contains("b&lt;"));
    }

    #[test]
    fn degenerate_extent() {
        let svg = scatter_svg(&[1.0, 1.0], &[0], &[], &ScatterStyle::default());
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}

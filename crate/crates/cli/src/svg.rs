//! Minimal SVG line and scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub style: Style,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn x_value(&self, x: f64) -> f64 {
        if self.log_x {
            x.ln()
        } else {
            x
        }
    }

    fn bounds(&self) -> Option<((f64, f64), (f64, f64))> {
        let pts = self.series.iter().flat_map(|s| &s.points).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            let x = self.x_value(x);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        for &v in &self.vertical {
            x0 = x0.min(self.x_value(v));
            x1 = x1.max(self.x_value(v));
        }
        for &h in &self.horizontal {
            y0 = y0.min(h);
            y1 = y1.max(h);
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return None;
        }
        let pad = |lo: f64, hi: f64| if hi > lo { ((hi - lo) * 0.03, (hi - lo) * 0.03) } else { (0.5, 0.5) };
        let (px, qx) = pad(x0, x1);
        let (py, qy) = pad(y0, y1);
        Some(((x0 - px, x1 + qx), (y0 - py, y1 + qy)))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let Some(((x0, x1), (y0, y1))) = self.bounds() else {
            out.push_str("</svg>\n");
            return out;
        };
        let sx = |x: f64| MARGIN + (self.x_value(x) - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let label = if self.log_x { xv.exp() } else { xv };
            let px = left + f * (right - left);
            let _ = writeln!(out, r#"<line x1="{px:.1}" y1="{bottom}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, bottom + 5.0);
            let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{label:.3}</text>"#, bottom + 18.0);
            let yv = y0 + f * (y1 - y0);
            let py = bottom - f * (bottom - top);
            let _ = writeln!(out, r#"<line x1="{:.1}" y1="{py:.1}" x2="{left}" y2="{py:.1}" stroke="black"/>"#, left - 5.0);
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#, left - 8.0, py + 4.0);
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for s in &self.series {
            let finite = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite());
            match s.style {
                Style::Line => {
                    let path: Vec<String> = finite.map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.6" points="{}"/>"#,
                        s.color,
                        path.join(" ")
                    );
                }
                Style::Points => {
                    for &(x, y) in finite {
                        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#, sx(x), sy(y), s.color);
                    }
                }
            }
        }
        for &v in &self.vertical {
            let px = sx(v);
            let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{bottom}" stroke="red" stroke-dasharray="6 4"/>"#);
        }
        for &h in &self.horizontal {
            let py = sy(h);
            let _ = writeln!(out, r#"<line x1="{left}" y1="{py:.2}" x2="{right}" y2="{py:.2}" stroke="red" stroke-dasharray="6 4"/>"#);
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_markers() {
        let plot = Plot {
            title: "a < b".into(),
            log_x: true,
            series: vec![Series { points: vec![(0.1, 0.0), (1.0, 1.0)], color: "black".into(), style: Style::Line }],
            vertical: vec![0.5],
            ..Plot::default()
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline") && svg.contains("stroke-dasharray"));
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn empty_plot_is_valid() {
        assert!(Plot::default().render().trim_end().ends_with("</svg>"));
    }
}

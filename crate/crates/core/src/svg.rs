//! Minimal self-contained SVG line charts: axes with ticks, polylines,
//! dashed lines and `+` markers. Output depends only on the input values.

use std::fmt::Write as _;

use crate::stochastic::WindowVerdict;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
    /// Draw `+` markers at the points instead of a line.
    pub markers: bool,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>, color: &str) -> Self {
        Series { name: name.into(), points, color: color.into(), dashed: false, markers: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn as_markers(mut self) -> Self {
        self.markers = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub width: f64,
    pub height: f64,
}

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new(), width: 720.0, height: 360.0 }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let (x0, x1) = range(pts().map(|p| p.0));
        let (y0, y1) = range(pts().map(|p| p.1));
        let (pw, ph) = (self.width - MARGIN_L - MARGIN_R, self.height - MARGIN_T - MARGIN_B);
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = num(self.width),
            h = num(self.height)
        );
        let _ = writeln!(o, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, num(self.width), num(self.height));
        let _ = writeln!(o, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, num(self.width / 2.0), esc(&self.title));
        let _ = writeln!(o, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#, num(MARGIN_L), num(MARGIN_T), num(pw), num(ph));

        for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
            let step = nice_step(hi - lo);
            let mut t = (lo / step).ceil() * step;
            while t <= hi + step * 1e-9 {
                if horizontal {
                    let x = sx(t);
                    let yb = MARGIN_T + ph;
                    let _ = writeln!(o, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#, num(x), num(yb), num(yb + 5.0));
                    let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(x), num(yb + 18.0), tick_label(t));
                } else {
                    let y = sy(t);
                    let _ = writeln!(o, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#, num(MARGIN_L - 5.0), num(y), num(MARGIN_L));
                    let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, num(MARGIN_L - 8.0), num(y + 4.0), tick_label(t));
                }
                t += step;
            }
        }
        let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(MARGIN_L + pw / 2.0), num(self.height - 12.0), esc(&self.x_label));
        let _ = writeln!(
            o,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            num(MARGIN_T + ph / 2.0),
            esc(&self.y_label)
        );

        for s in &self.series {
            let finite: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if s.markers {
                for (x, y) in finite {
                    let (cx, cy) = (sx(x), sy(y));
                    let _ = writeln!(
                        o,
                        r#"<path d="M{} {}H{}M{} {}V{}" stroke="{c}" stroke-width="1.5"/>"#,
                        num(cx - 4.0),
                        num(cy),
                        num(cx + 4.0),
                        num(cx),
                        num(cy - 4.0),
                        num(cy + 4.0),
                        c = esc(&s.color)
                    );
                }
            } else if !finite.is_empty() {
                let path: Vec<String> = finite.iter().map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y)))).collect();
                let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(o, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#, path.join(" "), esc(&s.color));
            }
        }
        for (i, s) in self.series.iter().enumerate() {
            let y = MARGIN_T + 14.0 + 16.0 * i as f64;
            let x = MARGIN_L + pw - 150.0;
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(o, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="1.5"{dash}/>"#, num(x), num(y - 4.0), num(x + 20.0), esc(&s.color));
            let _ = writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, num(x + 26.0), num(y), esc(&s.name));
        }
        o.push_str("</svg>\n");
        o
    }
}

/// Score curve, threshold line and flagged-window markers of a window detector.
pub fn window_chart(title: &str, verdicts: &[WindowVerdict]) -> Chart {
    let live: Vec<&WindowVerdict> = verdicts.iter().filter(|v| !v.degenerate).collect();
    Chart::new(title, "time (s)", "score")
        .with(Series::line("score", live.iter().map(|v| (v.start_time, v.score)).collect(), "#1f4e9c"))
        .with(Series::line("threshold", live.iter().map(|v| (v.start_time, v.threshold)).collect(), "#2a9d2a").dashed())
        .with(Series::line("flagged", live.iter().filter(|v| v.flagged).map(|v| (v.start_time, v.score)).collect(), "#d62728").as_markers())
}

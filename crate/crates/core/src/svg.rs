//! Minimal SVG figures built from primitive elements: scatter plots, line
//! overlays and bar charts. CSV files are the canonical outputs; these are
//! for a quick look.

use std::fmt::Write as _;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Points(Vec<(f64, f64)>),
    Line { points: Vec<(f64, f64)>, dashed: bool },
    /// Bars of equal width starting at `x0`.
    Bars { x0: f64, width: f64, heights: Vec<f64> },
    Diagonal,
    HLine(f64),
}

/// A single-panel figure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    layers: Vec<Layer>,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Figure {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            layers: Vec::new(),
        }
    }

    pub fn scatter(mut self, points: Vec<(f64, f64)>) -> Self {
        self.layers.push(Layer::Points(points));
        self
    }

    pub fn line(mut self, xs: &[f64], ys: &[f64], dashed: bool) -> Self {
        self.layers.push(Layer::Line {
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
            dashed,
        });
        self
    }

    pub fn bars(mut self, x0: f64, width: f64, heights: Vec<f64>) -> Self {
        self.layers.push(Layer::Bars { x0, width, heights });
        self
    }

    /// Adds the line y = x across the plotted range.
    pub fn diagonal(mut self) -> Self {
        self.layers.push(Layer::Diagonal);
        self
    }

    pub fn hline(mut self, y: f64) -> Self {
        self.layers.push(Layer::HLine(y));
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut see = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        };
        for l in &self.layers {
            match l {
                Layer::Points(p) | Layer::Line { points: p, .. } => p.iter().for_each(|&(x, y)| see(x, y)),
                Layer::Bars { x0, width, heights } => {
                    for (k, &h) in heights.iter().enumerate() {
                        see(x0 + k as f64 * width, 0.0);
                        see(x0 + (k + 1) as f64 * width, h);
                    }
                }
                Layer::HLine(_) | Layer::Diagonal => {}
            }
        }
        for l in &self.layers {
            if let Layer::HLine(y) = l {
                if y.is_finite() && x0.is_finite() {
                    y0 = y0.min(*y);
                    y1 = y1.max(*y);
                }
            }
        }
        if self.layers.contains(&Layer::Diagonal) {
            let lo = x0.min(y0);
            let hi = x1.max(y1);
            (x0, x1, y0, y1) = (lo, hi, lo, hi);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    /// Renders the figure. Output depends only on the figure contents.
    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r##"<path d="M{:.2} {:.2}H{:.2}M{:.2} {:.2}V{:.2}" stroke="#333" fill="none"/>"##,
            MARGIN,
            HEIGHT - MARGIN,
            WIDTH - MARGIN,
            MARGIN,
            HEIGHT - MARGIN,
            MARGIN
        );
        for (k, (v, anchor)) in [(x0, "start"), (x1, "end")].into_iter().enumerate() {
            let x = if k == 0 { MARGIN } else { WIDTH - MARGIN };
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#, HEIGHT - MARGIN + 14.0, tick(v));
        }
        for (v, y) in [(y0, HEIGHT - MARGIN), (y1, MARGIN)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, y + 4.0, tick(v));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        let mut color = 0;
        for l in &self.layers {
            let c = PALETTE[color % PALETTE.len()];
            match l {
                Layer::Points(p) => {
                    let mut d = String::new();
                    for &(x, y) in p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = write!(d, "M{:.2} {:.2}h0.01", px(x), py(y));
                    }
                    let _ = writeln!(s, r#"<path d="{d}" stroke="{c}" stroke-width="4" stroke-linecap="round" stroke-opacity="0.6"/>"#);
                    color += 1;
                }
                Layer::Line { points, dashed } => {
                    let mut d = String::new();
                    let mut pen_down = false;
                    for &(x, y) in points {
                        if x.is_finite() && y.is_finite() {
                            let _ = write!(d, "{}{:.2} {:.2}", if pen_down { "L" } else { "M" }, px(x), py(y));
                            pen_down = true;
                        } else {
                            pen_down = false;
                        }
                    }
                    let dash = if *dashed { r#" stroke-dasharray="5 4""# } else { "" };
                    let _ = writeln!(s, r#"<path d="{d}" stroke="{c}" stroke-width="1.5" fill="none"{dash}/>"#);
                    color += 1;
                }
                Layer::Bars { x0: bx, width, heights } => {
                    let mut d = String::new();
                    for (k, &h) in heights.iter().enumerate().filter(|(_, h)| h.is_finite()) {
                        let (l, r) = (px(bx + k as f64 * width), px(bx + (k + 1) as f64 * width));
                        let _ = write!(d, "M{:.2} {:.2}V{:.2}H{:.2}V{:.2}Z", l, py(0.0), py(h), r, py(0.0));
                    }
                    let _ = writeln!(s, r##"<path d="{d}" fill="{c}" fill-opacity="0.5" stroke="#333" stroke-width="0.5"/>"##);
                    color += 1;
                }
                Layer::Diagonal => {
                    let _ = writeln!(
                        s,
                        r##"<path d="M{:.2} {:.2}L{:.2} {:.2}" stroke="#1f3fbf" stroke-width="1"/>"##,
                        px(x0),
                        py(x0),
                        px(x1),
                        py(x1)
                    );
                }
                Layer::HLine(y) => {
                    let _ = writeln!(
                        s,
                        r##"<path d="M{:.2} {:.2}H{:.2}" stroke="#555" stroke-dasharray="3 3"/>"##,
                        MARGIN,
                        py(*y),
                        WIDTH - MARGIN
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_every_layer() {
        let fig = Figure::new("a < b", "x", "y")
            .scatter(vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])
            .line(&[0.0, 1.0, 2.0], &[1.0, 2.0, 1.0], true)
            .bars(0.0, 0.5, vec![1.0, 2.0])
            .hline(1.5)
            .diagonal();
        let svg = fig.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("stroke-dasharray=\"5 4\""));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg, fig.to_svg());
    }

    #[test]
    fn empty_and_flat_figures() {
        let svg = Figure::new("", "", "").to_svg();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        let flat = Figure::new("", "", "").line(&[1.0, 1.0], &[2.0, 2.0], false).to_svg();
        assert!(!flat.contains("NaN"));
    }
}

//! Minimal deterministic SVG plot writer: axes, polylines, markers, legend.
//! No plotting dependency, so a fixed record yields byte-identical output.

/// One named series of (x, y) points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    /// Draw straight segments between points.
    pub line: bool,
    /// Draw circle markers at points.
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn fmt_tick(v: f64, log: bool) -> String {
    if log {
        format!("{v:.1e}")
    } else if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Plot {
    pub fn render(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() {
                    xs.push(x);
                }
                let yv = if self.log_y { y.max(1e-300).log10() } else { y };
                if yv.is_finite() && (!self.log_y || y > 0.0) {
                    ys.push(yv);
                }
            }
        }
        let (x0, x1) = range_of(&xs);
        let (y0, y1) = range_of(&ys);
        let to_px = |x: f64, y: f64| -> (f64, f64) {
            let yv = if self.log_y { y.max(1e-300).log10() } else { y };
            (
                ML + (x - x0) / (x1 - x0) * (WIDTH - ML - MR),
                HEIGHT - MB - (yv - y0) / (y1 - y0) * (HEIGHT - MT - MB),
            )
        };

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));
        // frame
        out.push_str(&format!(
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"black\" stroke-width=\"1\"/>\n",
            WIDTH - ML - MR,
            HEIGHT - MT - MB
        ));
        // ticks
        for i in 0..=5 {
            let fx = x0 + (x1 - x0) * i as f64 / 5.0;
            let (px, _) = to_px(fx, if self.log_y { 10f64.powf(y0) } else { y0 });
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
                fmt(px),
                fmt(HEIGHT - MB),
                fmt(px),
                fmt(HEIGHT - MB + 5.0)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{}</text>\n",
                fmt(px),
                fmt(HEIGHT - MB + 18.0),
                fmt_tick(fx, false)
            ));
            let fy = y0 + (y1 - y0) * i as f64 / 5.0;
            let py = HEIGHT - MB - (fy - y0) / (y1 - y0) * (HEIGHT - MT - MB);
            let shown = if self.log_y { 10f64.powf(fy) } else { fy };
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
                fmt(ML - 5.0),
                fmt(py),
                fmt(ML),
                fmt(py)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"end\">{}</text>\n",
                fmt(ML - 8.0),
                fmt(py + 4.0),
                fmt_tick(shown, self.log_y)
            ));
        }
        // axis labels
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        ));
        // series
        for s in &self.series {
            if s.line && s.points.len() > 1 {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                    .map(|&(x, y)| {
                        let (px, py) = to_px(x, y);
                        format!("{},{}", fmt(px), fmt(py))
                    })
                    .collect();
                out.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
                    s.color,
                    pts.join(" ")
                ));
            }
            if s.markers {
                for &(x, y) in &s.points {
                    if !x.is_finite() || !y.is_finite() || (self.log_y && y <= 0.0) {
                        continue;
                    }
                    let (px, py) = to_px(x, y);
                    out.push_str(&format!(
                        "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n",
                        fmt(px),
                        fmt(py),
                        s.color
                    ));
                }
            }
        }
        // legend
        for (i, s) in self.series.iter().enumerate() {
            let ly = MT + 14.0 + 16.0 * i as f64;
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                fmt(ML + 10.0),
                fmt(ly - 4.0),
                fmt(ML + 34.0),
                fmt(ly - 4.0),
                s.color
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                fmt(ML + 40.0),
                fmt(ly),
                escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn range_of(vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        // single-point series: pad symmetrically, no interpolation
        return (lo - 0.5 - lo.abs() * 0.1, hi + 0.5 + hi.abs() * 0.1);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic() {
        let plot = Plot {
            title: "test".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![Series {
                label: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.01)],
                color: PALETTE[0].into(),
                line: true,
                markers: true,
            }],
        };
        let a = plot.render();
        let b = plot.render();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn single_point_series_renders_marker_only() {
        let plot = Plot {
            title: "one".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: false,
            series: vec![Series {
                label: "pt".into(),
                points: vec![(3.0, 7.0)],
                color: PALETTE[1].into(),
                line: true,
                markers: true,
            }],
        };
        let svg = plot.render();
        assert!(svg.contains("circle"));
        assert!(!svg.contains("polyline"));
    }
}

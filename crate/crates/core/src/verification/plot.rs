use std::fmt::Write as _;

/// One polyline of a log-log plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A reference slope drawn as a small right triangle.
#[derive(Debug, Clone, Copy)]
pub struct SlopeMark {
    pub slope: f64,
    /// index of the series the triangle is anchored below
    pub series: usize,
}

/// Self-contained SVG log-log chart. The plotted data are repeated in an
/// XML comment so a figure can be checked without its CSV.
#[derive(Debug, Clone)]
pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub slopes: Vec<SlopeMark>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a - 1.0, b)
    } else {
        (a, b)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LogLogPlot {
    pub fn render(&self) -> String {
        let finite = |&(x, y): &(f64, f64)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).filter(finite).collect();
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        svg.push_str("<!-- data\n");
        for s in &self.series {
            for &(x, y) in &s.points {
                let _ = writeln!(svg, "{} {x:e} {y:e}", escape(&s.label).replace("--", "- -"));
            }
        }
        svg.push_str("-->\n");
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            escape(&self.title)
        );
        if pts.is_empty() {
            svg.push_str("</svg>\n");
            return svg;
        }
        let (xmin, xmax) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
        let (ymin, ymax) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
        let (dx0, dx1) = decades(xmin, xmax);
        let (dy0, dy1) = decades(ymin, ymax);
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let px = |x: f64| LEFT + (x.log10() - dx0) / (dx1 - dx0) * pw;
        let py = |y: f64| TOP + (dy1 - y.log10()) / (dy1 - dy0) * ph;

        let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for d in dx0 as i32..=dx1 as i32 {
            let x = px(10f64.powi(d));
            let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, TOP + ph);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, TOP + ph + 18.0);
        }
        for d in dy0 as i32..=dy1 as i32 {
            let y = py(10f64.powi(d));
            let _ = writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .filter(|p| finite(p))
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (x, y) = c.split_once(',').unwrap();
                let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.label)
            );
        }

        for mark in &self.slopes {
            let Some(s) = self.series.get(mark.series) else { continue };
            let good: Vec<(f64, f64)> = s.points.iter().copied().filter(finite).collect();
            if good.len() < 2 {
                continue;
            }
            // anchored below the two finest points of the series
            let (a, b) = (good[good.len() - 1], good[good.len() - 2]);
            let (x0, x1) = (a.0.min(b.0), a.0.max(b.0));
            let y0 = a.1.min(b.1) * 0.5;
            let y1 = y0 * (x1 / x0).powf(mark.slope);
            let (sx0, sx1, sy0, sy1) = (px(x0), px(x1), py(y0), py(y1));
            let _ = writeln!(
                svg,
                r#"<polygon points="{sx0:.2},{sy0:.2} {sx1:.2},{sy0:.2} {sx1:.2},{sy1:.2}" fill="none" stroke="black"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                sx1 + 4.0,
                (sy0 + sy1) / 2.0 + 4.0,
                mark.slope
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_data_comment() {
        let plot = LogLogPlot {
            title: "e vs h".into(),
            x_label: "h".into(),
            y_label: "error".into(),
            series: vec![Series {
                label: "eL2 <voro>".into(),
                points: vec![(0.1, 1e-3), (0.05, 2.5e-4), (0.025, f64::NAN)],
            }],
            slopes: vec![SlopeMark { slope: 2.0, series: 0 }],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("eL2 &lt;voro&gt; 1e-1 1e-3"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
    }

    #[test]
    fn empty_plot_is_valid() {
        let plot = LogLogPlot {
            title: "none".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![],
            slopes: vec![],
        };
        assert!(plot.render().ends_with("</svg>\n"));
    }
}

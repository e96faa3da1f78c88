//! Minimal self-contained SVG figures: the dual-region wheel of a planar
//! solution and simple x/y charts.

use std::f64::consts::TAU;
use std::fmt::Write;

use sphere_blasso_core::certificate::DualCertificate;
use sphere_blasso_core::geometry::{ProblemInstance, SparseMeasure};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// `eta` drawn radially around the unit circle (`r = R (1 + s eta)`), with
/// dashed reference circles at `eta = +-1`, the hyperplanes `<w, x^j> = 0` as
/// dashed diameters and the atoms as discs scaled by `|c_i|` (blue positive,
/// red negative). Planar instances only.
pub fn wheel(instance: &ProblemInstance, measure: &SparseMeasure, cert: &DualCertificate, samples: usize) -> String {
    let (size, r0, s) = (480.0, 140.0, 0.35);
    let (cx, cy) = (size / 2.0, size / 2.0);
    let to_px = |x: f64, y: f64| (cx + x, cy - y);
    let mut out = String::new();
    header(&mut out, size, size);
    let _ = writeln!(
        out,
        r##"<circle cx="{cx}" cy="{cy}" r="{r0}" fill="none" stroke="#444" stroke-width="1"/>"##
    );
    for (k, label) in [(1.0, "eta = +1"), (-1.0, "eta = -1")] {
        let r = r0 * (1.0 + s * k);
        let _ = writeln!(
            out,
            r##"<circle cx="{cx}" cy="{cy}" r="{r:.3}" fill="none" stroke="#999" stroke-dasharray="4 4"/>"##
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" fill="#777">{label}</text>"##,
            cx + r * 0.72 + 4.0,
            cy - r * 0.72
        );
    }
    let reach = r0 * (1.0 + s) + 20.0;
    for x in instance.points() {
        let len = x[0].hypot(x[1]);
        let (nx, ny) = (-x[1] / len, x[0] / len);
        let (a, b) = (to_px(nx * reach, ny * reach), to_px(-nx * reach, -ny * reach));
        let _ = writeln!(
            out,
            r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#bbb" stroke-dasharray="6 3"/>"##,
            a.0, a.1, b.0, b.1
        );
    }
    let mut path = String::new();
    for k in 0..=samples {
        let t = TAU * k as f64 / samples as f64;
        let (c, sn) = (t.cos(), t.sin());
        let r = r0 * (1.0 + s * cert.eval(&[c, sn], instance));
        let p = to_px(r * c, r * sn);
        let _ = write!(path, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, p.0, p.1);
    }
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#333" stroke-width="1.5"/>"##,
        path.trim_end()
    );
    let cmax = measure.atoms.iter().map(|a| a.coefficient.abs()).fold(0.0, f64::max);
    for a in &measure.atoms {
        let w = a.location.as_slice();
        let p = to_px(r0 * w[0], r0 * w[1]);
        let rad = 4.0 + 8.0 * a.coefficient.abs() / cmax.max(1e-300);
        let color = if a.coefficient > 0.0 { PALETTE[0] } else { PALETTE[1] };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{rad:.3}" fill="{color}" fill-opacity="0.8"><title>c = {}</title></circle>"#,
            p.0, p.1, a.coefficient
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers at the points.
    pub markers: bool,
    /// Connect the points with a line.
    pub line: bool,
    pub dashed: bool,
    /// Index into the palette.
    pub color: usize,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect()
}

impl Chart {
    pub fn render(&self) -> String {
        let (w, h) = (560.0, 380.0);
        let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
        let fx = |x: f64| if self.log_x { x.log10() } else { x };
        let pts = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(fx(x));
            x1 = x1.max(fx(x));
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y1) = (0.0, 1.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        y1 += 0.05 * (y1 - y0);
        let pw = w - left - right;
        let ph = h - top - bottom;
        let px = |x: f64| left + (fx(x) - x0) / (x1 - x0) * pw;
        let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        header(&mut out, w, h);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            left + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for t in ticks(x0, x1, 5) {
            let x = left + (t - x0) / (x1 - x0) * pw;
            let label = if self.log_x {
                format!("1e{t:.1}")
            } else {
                format!("{t:.2e}")
            };
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                top + ph,
                top + ph + 5.0,
                top + ph + 18.0
            );
        }
        for t in ticks(y0, y1, 5) {
            let y = py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                left - 5.0,
                left - 8.0,
                y + 4.0,
                short(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            h - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            top + ph / 2.0,
            top + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[s.color % PALETTE.len()];
            if s.line && s.points.len() > 1 {
                let d: Vec<String> = s
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, y))| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, px(x), py(y)))
                    .collect();
                let dash = if s.dashed { r#" stroke-dasharray="5 4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    d.join(" ")
                );
            }
            if s.markers {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
            let ly = top + 12.0 + 18.0 * k as f64;
            let lx = left + pw + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn short(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use sphere_blasso_core::instances;

    #[test]
    fn wheel_is_self_contained() {
        let inst = instances::arrangement_instance();
        let svg = wheel(&inst, &SparseMeasure::empty(), &DualCertificate::zero(5), 360);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("href"));
        // One dashed diameter per data point.
        assert_eq!(svg.matches("stroke-dasharray=\"6 3\"").count(), 5);
    }

    #[test]
    fn chart_handles_empty_and_log_axes() {
        let chart = Chart {
            title: "a < b".into(),
            x_label: "lambda".into(),
            y_label: "atoms".into(),
            log_x: true,
            series: vec![Series {
                label: "count".into(),
                points: vec![(1.0, 0.0), (1e-3, 3.0)],
                markers: true,
                line: true,
                dashed: false,
                color: 0,
            }],
        };
        let svg = chart.render();
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
        let empty = Chart { series: vec![], ..chart };
        assert!(!empty.render().contains("NaN"));
    }
}

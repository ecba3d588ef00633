//! Minimal static SVG line charts.

use std::fmt::Write;

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 32.0;
const MARGIN_B: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f4e79", "#b03a2e", "#1e8449", "#7d3c98"];
const DASHES: [&str; 4] = ["", "6 4", "2 3", "8 3 2 3"];

pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub hlines: Vec<f64>,
    pub vlines: Vec<f64>,
    /// Fixed y range; points outside are clipped.
    pub y_range: Option<(f64, f64)>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            hlines: Vec::new(),
            vlines: Vec::new(),
            y_range: None,
        }
    }

    pub fn series(mut self, name: &str, x: &[f64], y: &[f64]) -> Self {
        self.series.push(Series {
            name: name.into(),
            x: x.to_vec(),
            y: y.to_vec(),
        });
        self
    }

    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let fold = |vals: &mut dyn Iterator<Item = f64>| {
            vals.filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        let xr = fold(&mut self.series.iter().flat_map(|s| s.x.iter().copied()));
        let yr = self.y_range.unwrap_or_else(|| {
            let (lo, hi) = fold(&mut self.series.iter().flat_map(|s| s.y.iter().copied()).chain(self.hlines.iter().copied()));
            let pad = 0.05 * (hi - lo).max(1e-12);
            (lo - pad, hi + pad)
        });
        (widen(xr), widen(yr))
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels side by side in one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, i, PANEL_W * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_panel(out: &mut String, p: &Panel, index: usize, x0: f64) {
    let ((xl, xh), (yl, yh)) = p.ranges();
    let (left, right) = (x0 + MARGIN_L, x0 + PANEL_W - MARGIN_R);
    let (top, bottom) = (MARGIN_T, PANEL_H - MARGIN_B);
    let sx = |x: f64| left + (x - xl) / (xh - xl) * (right - left);
    let sy = |y: f64| bottom - (y - yl) / (yh - yl) * (bottom - top);
    let clip = format!("clip{index}");
    let _ = writeln!(
        out,
        r#"<clipPath id="{clip}"><rect x="{left}" y="{top}" width="{}" height="{}"/></clipPath>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in ticks(xl, xh) {
        let x = sx(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#, bottom + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 16.0, fmt_tick(t));
    }
    for t in ticks(yl, yh) {
        let y = sy(t);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, PANEL_H - 10.0, esc(&p.x_label));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {} {:.2})">{}</text>"#,
        x0 + 16.0,
        (top + bottom) / 2.0,
        x0 + 16.0,
        (top + bottom) / 2.0,
        esc(&p.y_label)
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (left + right) / 2.0, esc(&p.title));
    let _ = writeln!(out, r#"<g clip-path="url(#{clip})">"#);
    for &h in &p.hlines {
        let _ = writeln!(out, r#"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="gray" stroke-dasharray="5 5"/>"#, y = sy(h));
    }
    for &v in &p.vlines {
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{bottom}" stroke="gray" stroke-dasharray="5 5"/>"#, x = sx(v));
    }
    for (k, s) in p.series.iter().enumerate() {
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y.clamp(yl - (yh - yl), yh + (yh - yl)))))
            .collect();
        let dash = DASHES[k % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
            COLORS[k % COLORS.len()],
            pts.join(" ")
        );
    }
    out.push_str("</g>\n");
    if p.series.len() > 1 {
        for (k, s) in p.series.iter().enumerate() {
            let y = top + 14.0 + 14.0 * k as f64;
            let dash = DASHES[k % DASHES.len()];
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="1.5" stroke-dasharray="{dash}"/><text x="{}" y="{}">{}</text>"#,
                right - 120.0,
                right - 96.0,
                COLORS[k % COLORS.len()],
                right - 90.0,
                y + 4.0,
                esc(&s.name)
            );
        }
    }
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_cover_the_range() {
        let t = ticks(-0.49, 0.99);
        assert!(t.contains(&0.0) && t.contains(&0.5));
        assert!(t.iter().all(|v| *v >= -0.49 && *v <= 0.99));
    }

    #[test]
    fn render_has_one_polyline_per_series() {
        let p = Panel::new("t", "x", "y")
            .series("a", &[0.0, 1.0], &[1.0, 2.0])
            .series("b", &[0.0, 1.0], &[2.0, f64::NAN]);
        let svg = render(&[p]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}

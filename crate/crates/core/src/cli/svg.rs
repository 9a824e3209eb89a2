//! Minimal SVG line and scatter plots.

use std::fmt::Write as _;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 46.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
    LineMarkers,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional `(low, high)` error bar per point.
    pub bars: Option<Vec<(f64, f64)>>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self {
            name: name.into(),
            points,
            bars: None,
            style,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Dashed horizontal reference lines with a label.
    pub hlines: Vec<(f64, String)>,
    /// Dashed vertical reference lines with a label.
    pub vlines: Vec<(f64, String)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log2() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let pad = 0.04 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log2() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    /// Tick values in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            let stride = ((b - a) / 8 + 1).max(1);
            return (a..=b)
                .filter(|k| k % stride == 0)
                .map(|k| (k as f64).exp2())
                .collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 7.0)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render_panel(out: &mut String, p: &Panel, top: f64) {
    let xs = p
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|q| q.0))
        .chain(p.vlines.iter().map(|v| v.0));
    let ys = p
        .series
        .iter()
        .flat_map(|s| {
            let bars = s.bars.iter().flatten().flat_map(|b| [b.0, b.1]);
            s.points.iter().map(|q| q.1).chain(bars)
        })
        .chain(p.hlines.iter().map(|h| h.0));
    let ax = Axis::fit(xs, p.log_x);
    let ay = Axis::fit(ys, p.log_y);
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let x0 = MARGIN_L;
    let y0 = top + MARGIN_T;
    let px = |v: f64| ax.unit(v).map(|u| x0 + u * w);
    let py = |v: f64| ay.unit(v).map(|u| y0 + h - u * h);

    writeln!(
        out,
        r#"<g class="panel"><title>{}</title>"#,
        escape(&p.title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        top + 20.0,
        escape(&p.title)
    )
    .unwrap();
    writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##
    )
    .unwrap();
    for t in ax.ticks() {
        if let Some(x) = px(t) {
            writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
                y0 + h,
                y0 + h + 4.0,
                y0 + h + 16.0,
                fmt_tick(t)
            )
            .unwrap();
        }
    }
    for t in ay.ticks() {
        if let Some(y) = py(t) {
            writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 3.0,
                fmt_tick(t)
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        y0 + h + 34.0,
        escape(&p.x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 - 50.0,
        y0 + h / 2.0,
        x0 - 50.0,
        y0 + h / 2.0,
        escape(&p.y_label)
    )
    .unwrap();

    for (v, label) in &p.hlines {
        if let Some(y) = py(*v) {
            writeln!(
                out,
                r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#777" stroke-dasharray="6 4"><title>{} = {v}</title></line>"##,
                x0 + w,
                escape(label)
            )
            .unwrap();
        }
    }
    for (v, label) in &p.vlines {
        if let Some(x) = px(*v) {
            writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="#777" stroke-dasharray="6 4"><title>{} = {v}</title></line>"##,
                y0 + h,
                escape(label)
            )
            .unwrap();
        }
    }

    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if matches!(s.style, Style::Line | Style::LineMarkers) {
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in &s.points {
                match (px(x), py(y)) {
                    (Some(x), Some(y)) => {
                        write!(d, "{}{x:.2},{y:.2} ", if pen_down { "L" } else { "M" }).unwrap();
                        pen_down = true;
                    }
                    _ => pen_down = false,
                }
            }
            writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                d.trim_end()
            )
            .unwrap();
        }
        if let Some(bars) = &s.bars {
            for (&(x, _), &(lo, hi)) in s.points.iter().zip(bars) {
                if let (Some(x), Some(a), Some(b)) = (px(x), py(lo), py(hi)) {
                    writeln!(out, r#"<line x1="{x:.2}" y1="{a:.2}" x2="{x:.2}" y2="{b:.2}" stroke="{color}"/>"#).unwrap();
                }
            }
        }
        if matches!(s.style, Style::Markers | Style::LineMarkers) {
            for &(x, y) in &s.points {
                if let (Some(cx), Some(cy)) = (px(x), py(y)) {
                    writeln!(
                        out,
                        r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"><title>{}: ({x}, {y})</title></circle>"#,
                        escape(&s.name)
                    )
                    .unwrap();
                }
            }
        }
        let ly = y0 + 14.0 + 16.0 * i as f64;
        writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="3" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            x0 + w + 10.0,
            ly - 4.0,
            x0 + w + 26.0,
            ly,
            escape(&s.name)
        )
        .unwrap();
    }
    out.push_str("</g>\n");
}

/// Stacks `panels` vertically into one SVG document. `comment` is embedded
/// verbatim as an XML comment (used for the manifest hash).
pub fn render(title: &str, comment: &str, panels: &[Panel]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(out, "<!-- {} -->", comment.replace("--", "- -")).unwrap();
    writeln!(out, "<title>{}</title>", escape(title)).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_carry_titles_and_reference_lines_render() {
        let panel = Panel {
            title: "loss".into(),
            x_label: "t".into(),
            y_label: "L".into(),
            series: vec![Series::new(
                "run <1>",
                vec![(0.0, 1.0), (1.0, 0.5)],
                Style::LineMarkers,
            )],
            hlines: vec![(0.75, "2/eta".into())],
            ..Default::default()
        };
        let svg = render("demo", "manifest=abc", &[panel]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<!-- manifest=abc -->"));
        assert!(svg.contains("<title>run &lt;1&gt;: (1, 0.5)</title>"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn log_axis_skips_non_positive_values() {
        let panel = Panel {
            log_y: true,
            series: vec![Series::new(
                "s",
                vec![(1.0, 0.0), (2.0, 4.0), (3.0, 8.0)],
                Style::Markers,
            )],
            ..Default::default()
        };
        let svg = render("t", "", &[panel]);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn linear_ticks_are_round() {
        let ax = Axis {
            lo: 0.0,
            hi: 1.0,
            log: false,
        };
        let t = ax.ticks();
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.len() >= 3 && t.len() <= 8);
    }
}

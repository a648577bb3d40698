//! Minimal static SVG charts.

use std::fmt::Write;

use crate::report::{CrashRow, ScatterRow, SeriesRow};

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        M + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * M)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn open(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>
<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>
"#,
        W / 2.0,
        H - M,
        W - M,
        H - M,
        H - M,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0,
    );
    s
}

fn y_ticks(s: &mut String, f: &Frame) {
    for i in 0..=4 {
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, M - 6.0, f.py(y) + 4.0);
    }
}

fn legend(s: &mut String, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        let y = M + 16.0 * i as f64;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - M - 110.0, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{n}</text>"#, W - M - 94.0);
    }
}

fn names<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in it {
        if !out.contains(n) {
            out.push(n.clone());
        }
    }
    out
}

/// Failure rate per axis point, one polyline per method (categorical x).
pub fn failure_chart(axis: &str, series: &[SeriesRow]) -> String {
    let values = names(series.iter().map(|r| &r.axis_value));
    let methods = names(series.iter().map(|r| &r.method));
    let f = Frame::new(
        (0..values.len()).map(|i| i as f64),
        series.iter().map(|r| r.failure_rate).chain(std::iter::once(0.0)),
    );
    let mut s = open("Failure rate", axis, "failures / km");
    y_ticks(&mut s, &f);
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{v}</text>"#, f.px(i as f64), H - M + 16.0);
    }
    for (mi, m) in methods.iter().enumerate() {
        let pts: Vec<String> = series
            .iter()
            .filter(|r| &r.method == m)
            .filter_map(|r| values.iter().position(|v| v == &r.axis_value).map(|i| (i, r.failure_rate)))
            .map(|(i, y)| format!("{:.1},{:.1}", f.px(i as f64), f.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            PALETTE[mi % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

pub fn scatter_chart(rows: &[ScatterRow]) -> String {
    let methods = names(rows.iter().map(|r| &r.method));
    let f = Frame::new(
        rows.iter().map(|r| r.recall_t1).chain([0.0, 1.0]),
        rows.iter().map(|r| r.failure_rate).chain(std::iter::once(0.0)),
    );
    let mut s = open("Recall vs failure rate", "recall T1", "failures / km");
    y_ticks(&mut s, &f);
    for (mi, m) in methods.iter().enumerate() {
        for r in rows.iter().filter(|r| &r.method == m) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{}"><title>{}</title></circle>"#,
                f.px(r.recall_t1),
                f.py(r.failure_rate),
                PALETTE[mi % PALETTE.len()],
                r.axis_value
            );
        }
    }
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

/// Route polyline with crash positions colored by axis value.
pub fn crash_map(route: &[[f64; 2]], crashes: &[CrashRow]) -> String {
    let xs = route.iter().map(|p| p[0]).chain(crashes.iter().map(|c| c.x));
    let ys = route.iter().map(|p| p[1]).chain(crashes.iter().map(|c| c.y));
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    // Equal scale on both axes.
    let span = (x1 - x0).max(y1 - y0);
    let f = Frame { x0, x1: x0 + span, y0, y1: y0 + span };
    let mut s = open("Crash locations", "x [m]", "y [m]");
    let pts: Vec<String> = route.iter().map(|p| format!("{:.1},{:.1}", f.px(p[0]), f.py(p[1]))).collect();
    let _ = writeln!(s, r##"<polyline fill="none" stroke="#888" stroke-width="3" points="{}"/>"##, pts.join(" "));
    let groups = names(crashes.iter().map(|c| &c.axis_value));
    for c in crashes {
        let gi = groups.iter().position(|g| g == &c.axis_value).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}" fill-opacity="0.7"><title>{} {} ep {}</title></circle>"#,
            f.px(c.x),
            f.py(c.y),
            PALETTE[gi % PALETTE.len()],
            c.method,
            c.axis_value,
            c.episode
        );
    }
    legend(&mut s, &groups);
    s.push_str("</svg>\n");
    s
}

//! CSV rows and the bound-vs-parameter SVG plot.

use std::fmt::Write;

use super::PointResult;

pub const CSV_HEADER: &str =
    "param,analysis_feasible,analysis_bound,synth_feasible,xi,synth_bound,k_norm,cl_abscissa,oracle_max_cost,violations";

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => "nan".to_string(),
    }
}

/// One header line and one line per point, `\n`-terminated. Missing values
/// are written as `nan`.
pub fn to_csv(points: &[PointResult]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        let s = &p.synthesis;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            num(Some(p.param)),
            p.analysis.feasible(),
            num(p.analysis.bound),
            s.feasible(),
            num(s.xi),
            num(s.bound),
            num(s.k_norm),
            num(s.cl_abscissa),
            num(p.oracle_max_cost()),
            p.violations(),
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    pub title: String,
    pub x_label: String,
    /// Second line under the title, e.g. the cost weights in use.
    pub note: String,
    pub log_y: bool,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 70.0;
const BOTTOM: f64 = 70.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi - lo > 1e-12 * (1.0 + hi.abs()) {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Two polylines over the parameter: the open-loop bound (dashed) and the
/// controlled bound (solid). Infeasible points are left out of each curve.
pub fn render_svg(points: &[PointResult], opts: &SvgOptions) -> String {
    let ty = |v: f64| if opts.log_y { v.log10() } else { v };
    let keep = |v: &Option<f64>| v.filter(|x| x.is_finite() && (!opts.log_y || *x > 0.0));
    let curve = |get: &dyn Fn(&PointResult) -> Option<f64>| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter_map(|p| keep(&get(p)).map(|v| (p.param, ty(v))))
            .collect()
    };
    let open = curve(&|p| p.analysis.bound);
    let closed = curve(&|p| p.synthesis.bound);

    let (x0, x1) = padded(span(points.iter().map(|p| p.param)).unwrap_or((0.0, 1.0)));
    let (y0, y1) = padded(span(open.iter().chain(&closed).map(|&(_, y)| y)).unwrap_or((0.0, 1.0)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="800" height="600" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="400" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        escape(&opts.title)
    );
    let _ = writeln!(
        s,
        r##"<text x="400" y="48" text-anchor="middle" fill="#555">{}</text>"##,
        escape(&opts.note)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let ylabel = if opts.log_y { format!("{:.3}", 10f64.powf(yv)) } else { format!("{yv:.3}") };
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{ylabel}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 25.0,
        escape(&opts.x_label)
    );
    let ytitle = if opts.log_y { "cost bound (log scale)" } else { "cost bound" };
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{ytitle}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (pts, style, label, ly) in [
        (&open, r##"stroke="#1f5fbf" stroke-dasharray="8 5""##, "without controller", TOP + 18.0),
        (&closed, r##"stroke="#c0392b""##, "with controller", TOP + 36.0),
    ] {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke-width="2" {style} points="{}"/>"#,
            coords.join(" ")
        );
        let lx = LEFT + pw - 170.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke-width="2" {style}/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 30.0,
            lx + 38.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

//! Minimal self-contained SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    // flat data still needs a nonzero span
    if hi - lo <= 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Line chart. With `log_y`, nonpositive values are dropped and the axis shows
/// `log10` of the data.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let keep = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0);
    let xs = bounds(series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)).map(|p| p.0)));
    let ys = bounds(series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)).map(|p| ty(p.1))));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let y_title = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&y_title)
    );
    if let (Some((x0, x1)), Some((y0, y1))) = (xs, ys) {
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
                sx(fx),
                TOP + ph + 15.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
                LEFT - 5.0,
                sy(fy) + 3.0,
                tick(fy)
            );
        }
        for (i, s) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| keep(p))
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
                LEFT + 10.0,
                TOP + 15.0 + 14.0 * i as f64,
                escape(s.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// One colored cell per `(x, y)` sample on a regular lattice, with a legend.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, cells: &[(f64, f64, &str)], legend: &[(&str, &str)]) -> String {
    let mut xs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let mut ys: Vec<f64> = cells.iter().map(|c| c.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (pw, ph) = (W - LEFT - RIGHT - 120.0, H - TOP - BOTTOM);
    let cw = pw / xs.len().max(1) as f64;
    let ch = ph / ys.len().max(1) as f64;
    let index = |v: &[f64], x: f64| v.partition_point(|&a| a < x);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    for &(x, y, color) in cells {
        let i = index(&xs, x);
        let j = index(&ys, y);
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            LEFT + i as f64 * cw,
            TOP + ph - (j + 1) as f64 * ch,
            cw,
            ch
        );
    }
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    if let (Some(x0), Some(x1), Some(y0), Some(y1)) = (xs.first(), xs.last(), ys.first(), ys.last()) {
        let _ = writeln!(out, r#"<text x="{LEFT}" y="{}" font-size="10">{}</text>"#, TOP + ph + 15.0, tick(*x0));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#,
            LEFT + pw,
            TOP + ph + 15.0,
            tick(*x1)
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, LEFT - 5.0, TOP + ph, tick(*y0));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, LEFT - 5.0, TOP + 10.0, tick(*y1));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (k, (name, color)) in legend.iter().enumerate() {
        let y = TOP + 20.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{y}" width="12" height="12" fill="{color}"/>"#, LEFT + pw + 15.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, LEFT + pw + 32.0, y + 10.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let s = Series { name: "d<a>", points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0)] };
        let svg = line_chart("decay", "t", "d", &[s], true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("d&lt;a&gt;"));
        // the zero is dropped on a log axis
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }

    #[test]
    fn flat_and_empty_series() {
        let flat = Series { name: "flat", points: vec![(0.0, 2.0), (1.0, 2.0)] };
        assert!(!line_chart("f", "x", "y", &[flat], false).contains("NaN"));
        let empty = Series { name: "none", points: vec![] };
        assert!(line_chart("e", "x", "y", &[empty], false).contains("</svg>"));
    }

    #[test]
    fn heatmap_cells() {
        let cells = [(0.1, 0.1, "#000"), (0.2, 0.1, "#111"), (0.2, 0.2, "#222")];
        let svg = heatmap("h", "p", "q", &cells, &[("a", "#000")]);
        assert_eq!(svg.matches("<rect").count(), 2 + 3 + 1);
    }
}

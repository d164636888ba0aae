//! Minimal SVG bar and line charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>
"#,
        W / 2.0,
        esc(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 14.0,
        esc(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel),
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM,
        H - BOTTOM,
    );
}

fn y_axis(out: &mut String, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_h = H - TOP - BOTTOM;
    for k in 0..=5 {
        let v = lo + span * k as f64 / 5.0;
        let y = H - BOTTOM - plot_h * k as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    move |v: f64| H - BOTTOM - plot_h * (v - lo) / span
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{:.2}", v)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// Bars with optional ± error whiskers.
pub fn bar_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    labels: &[String],
    values: &[f64],
    errors: &[f64],
) -> String {
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    let hi = values
        .iter()
        .zip(errors.iter().chain(std::iter::repeat(&0.0)))
        .map(|(v, e)| v + e)
        .fold(0.0, f64::max);
    let ymap = y_axis(&mut out, 0.0, hi * 1.05);
    let slot = (W - LEFT - RIGHT) / values.len().max(1) as f64;
    for (k, v) in values.iter().enumerate() {
        let x = LEFT + slot * k as f64;
        let y = ymap(*v);
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
            x + slot * 0.15,
            slot * 0.7,
            H - BOTTOM - y,
            COLORS[0]
        );
        if let Some(e) = errors.get(k).filter(|e| **e > 0.0) {
            let cx = x + slot / 2.0;
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                ymap(v + e),
                ymap((v - e).max(0.0))
            );
        }
        if let Some(l) = labels.get(k) {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                x + slot / 2.0,
                H - BOTTOM + 16.0,
                esc(l)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per series over a shared x axis; `log_x` plots log₂ x.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_x: bool,
) -> String {
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    let tx = |x: f64| if log_x { x.log2() } else { x };
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut xlo, mut xhi, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in pts {
        xlo = xlo.min(tx(x));
        xhi = xhi.max(tx(x));
        yhi = yhi.max(y);
    }
    if !xlo.is_finite() {
        out.push_str("</svg>\n");
        return out;
    }
    let xspan = if xhi > xlo { xhi - xlo } else { 1.0 };
    let ymap = y_axis(&mut out, 0.0, yhi * 1.05);
    let xmap = |x: f64| LEFT + 10.0 + (W - LEFT - RIGHT - 20.0) * (tx(x) - xlo) / xspan;
    let mut xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.1.iter().map(|p| p.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            xmap(x),
            H - BOTTOM + 16.0,
            tick(x)
        );
    }
    for (k, (name, s)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let path: Vec<String> = s
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", xmap(x), ymap(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        if series.len() <= 12 {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
                LEFT + 12.0,
                TOP + 14.0 * (k + 1) as f64,
                esc(name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let b = bar_chart(
            "r",
            "x",
            "y",
            &["a".into(), "b".into()],
            &[1.0, 2.0],
            &[0.1, 0.2],
        );
        assert!(b.starts_with("<svg") && b.trim_end().ends_with("</svg>"));
        assert_eq!(b.matches("<rect").count(), 3);
        let l = line_chart(
            "r",
            "x",
            "y",
            &[("s".into(), vec![(1024.0, 1.0), (2048.0, 2.0)])],
            true,
        );
        assert_eq!(l.matches("<polyline").count(), 1);
        assert!(line_chart("e", "x", "y", &[], false).ends_with("</svg>\n"));
    }
}

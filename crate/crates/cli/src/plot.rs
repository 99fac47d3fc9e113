//! Minimal SVG line plots of mean ± one standard deviation.

use std::fmt::Write as _;

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub mean: &'a [f64],
    pub std: &'a [f64],
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 64.0;
const LEFT: f64 = 96.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the series. `offset` is subtracted from every value first, and the
/// y axis is logarithmic unless some shifted mean is clearly negative.
pub fn render(title: &str, x_label: &str, series: &[Series], offset: f64) -> String {
    let shifted: Vec<Vec<f64>> = series.iter().map(|s| s.mean.iter().map(|v| v - offset).collect()).collect();
    // Roundoff can push converged values slightly below zero; those are floored
    // on a log axis rather than forcing a linear one.
    let top = shifted.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let log_y = top > 0.0 && shifted.iter().flatten().all(|v| *v > -1e-9 * top);
    let floor = (top * 1e-16).max(f64::MIN_POSITIVE);
    let ty = |v: f64| if log_y { v.max(floor).log10() } else { v };

    let mut bands = Vec::new();
    for (s, m) in series.iter().zip(&shifted) {
        let lo: Vec<f64> = m.iter().zip(s.std).map(|(m, sd)| ty(if log_y { (m - sd).max(m.abs() * 1e-3) } else { m - sd })).collect();
        let hi: Vec<f64> = m.iter().zip(s.std).map(|(m, sd)| ty(m + sd)).collect();
        bands.push((lo, hi));
    }
    let xs = series.iter().flat_map(|s| s.x.iter().copied());
    let (x0, x1) = bounds(xs);
    let ys = bands.iter().flat_map(|(lo, hi)| lo.iter().chain(hi).copied());
    let (y0, y1) = bounds(ys);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    let (l, r, t, b) = (LEFT, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(svg, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#).unwrap();
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.3e}") };
        writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(fx), b + 18.0, tick(fx)).unwrap();
        writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#, l - 6.0, py(fy) + 4.0).unwrap();
    }
    let ylabel = match (log_y, offset != 0.0) {
        (true, true) => "f - f* (log10)",
        (true, false) => "f (log10)",
        (false, true) => "f - f*",
        (false, false) => "f",
    };
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label)).unwrap();
    writeln!(svg, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0)
        .unwrap();

    for (i, (s, (lo, hi))) in series.iter().zip(&bands).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for (x, y) in s.x.iter().zip(hi) {
            write!(band, "{:.2},{:.2} ", px(*x), py(*y)).unwrap();
        }
        for (x, y) in s.x.iter().zip(lo).rev() {
            write!(band, "{:.2},{:.2} ", px(*x), py(*y)).unwrap();
        }
        writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end()).unwrap();
        let line: Vec<String> = s.x.iter().zip(&shifted[i]).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(ty(*y)))).collect();
        writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" ")).unwrap();
        let ly = t + 16.0 * i as f64;
        writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, r - 150.0, r - 130.0).unwrap();
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, r - 124.0, ly + 4.0, escape(s.label)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(x: f64) -> String {
    if x.abs() >= 1e4 || (x != 0.0 && x.abs() < 1e-2) {
        format!("{x:.1e}")
    } else {
        format!("{x:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

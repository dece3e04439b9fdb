//! CSV and SVG writers.

use std::fmt::Write;

pub const CSV_HEADER: &str = "divergence,d,n_labels,n_preds,expected,noise,bias,variance,gap";

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub divergence: String,
    pub d: usize,
    pub n_labels: usize,
    pub n_preds: usize,
    pub expected: f64,
    pub noise: f64,
    pub bias: f64,
    pub variance: f64,
    pub gap: f64,
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            quote(&r.divergence),
            r.d,
            r.n_labels,
            r.n_preds,
            r.expected,
            r.noise,
            r.bias,
            r.variance,
            r.gap
        );
    }
    out
}

/// A static line plot of |gap| against the swept parameter.
pub fn gap_plot_svg(param: &str, xs: &[f64], gaps: &[f64]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let ys: Vec<f64> = gaps.iter().map(|g| g.abs()).collect();
    let (xmin, xmax) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let ymax = ys.iter().cloned().fold(0.0f64, f64::max);
    let xspan = if xmax > xmin { xmax - xmin } else { 1.0 };
    let yspan = if ymax > 0.0 { ymax } else { 1.0 };
    let px = |x: f64| M + (x - xmin) / xspan * (W - 2.0 * M);
    let py = |y: f64| H - M - y / yspan * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M:.2} {:.2} H{:.2} M{M:.2} {:.2} V{M:.2}" stroke="black" fill="none"/>"#,
        H - M,
        W - M,
        H - M
    );
    let pts: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
        pts.join(" ")
    );
    for (&x, &y) in xs.iter().zip(&ys) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            px(x),
            py(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{param}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(s, r#"<text x="12" y="{:.2}" font-size="12">|gap|</text>"#, M - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="{M:.2}" y="{:.2}" font-size="10" text-anchor="middle">{xmin:.3}</text>"#,
        H - M + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{xmax:.3}</text>"#,
        W - M,
        H - M + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{ymax:.3e}</text>"#,
        M - 4.0,
        M + 4.0
    );
    s.push_str("</svg>\n");
    s
}

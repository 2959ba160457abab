//! Chart and data-file renderers for benchmark reports.
//!
//! Charts are standalone SVG documents built as plain text; every number is
//! formatted with fixed precision so output is byte-stable.

use std::fmt::Write as _;

use crate::corpus::LabelCounts;
use crate::eval::{Metric, MetricsReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String) {
    let base = HEIGHT - MARGIN;
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{base}" x2="{:.1}" y2="{base}" stroke="#333"/>"##,
        WIDTH - MARGIN / 2.0
    );
    let _ = writeln!(out, r##"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="#333"/>"##);
}

fn bar(out: &mut String, x: f64, w: f64, h: f64, fill: &str, caption: &str) {
    let y = HEIGHT - MARGIN - h;
    let _ = writeln!(out, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
        x + w / 2.0,
        y - 4.0,
        escape(caption)
    );
}

fn x_label(out: &mut String, x: f64, text: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        HEIGHT - MARGIN + 16.0,
        escape(text)
    );
}

/// Bar chart of real versus fake document counts.
pub fn distribution_svg(counts: &LabelCounts) -> String {
    let mut out = String::new();
    svg_open(&mut out, "Distribution of real vs fake news");
    axes(&mut out);
    let max = counts.real.max(counts.fake).max(1) as f64;
    let plot_h = HEIGHT - 2.0 * MARGIN - 20.0;
    let slot = (WIDTH - 1.5 * MARGIN) / 2.0;
    let bars = [
        ("REAL", counts.real, counts.real_fraction(), PALETTE[0]),
        ("FAKE", counts.fake, counts.fake_fraction(), PALETTE[1]),
    ];
    for (i, (name, n, frac, fill)) in bars.into_iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.2;
        let w = slot * 0.6;
        bar(&mut out, x, w, plot_h * n as f64 / max, fill, &format!("{n} ({:.2}%)", 100.0 * frac));
        x_label(&mut out, x + w / 2.0, name);
    }
    out.push_str("</svg>\n");
    out
}

pub fn distribution_csv(counts: &LabelCounts) -> String {
    format!(
        "label,count,fraction\nREAL,{},{:.6}\nFAKE,{},{:.6}\n",
        counts.real,
        counts.real_fraction(),
        counts.fake,
        counts.fake_fraction()
    )
}

/// Grouped bars: one group per model, one bar per metric.
pub fn comparison_svg(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    svg_open(&mut out, "Model comparison on the test split");
    axes(&mut out);
    let plot_h = HEIGHT - 2.0 * MARGIN - 20.0;
    let n = reports.len().max(1) as f64;
    let slot = (WIDTH - 1.5 * MARGIN) / n;
    let bar_w = slot * 0.8 / Metric::ALL.len() as f64;
    for (i, r) in reports.iter().enumerate() {
        let x0 = MARGIN + slot * i as f64 + slot * 0.1;
        for (k, m) in Metric::ALL.iter().enumerate() {
            let v = r.metric(*m);
            bar(
                &mut out,
                x0 + bar_w * k as f64,
                bar_w,
                plot_h * v,
                PALETTE[k],
                &format!("{:.1}", 100.0 * v),
            );
        }
        x_label(&mut out, x0 + slot * 0.4, &r.model_name);
    }
    for (k, m) in Metric::ALL.iter().enumerate() {
        let x = MARGIN + 10.0 + 110.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            HEIGHT - 24.0,
            PALETTE[k]
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 14.0, HEIGHT - 15.0, m.header());
    }
    out.push_str("</svg>\n");
    out
}

pub fn comparison_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("model,accuracy,precision,recall,f1\n");
    for r in reports {
        let name = if r.model_name.contains([',', '"']) {
            format!("\"{}\"", r.model_name.replace('"', "\"\""))
        } else {
            r.model_name.clone()
        };
        let _ = writeln!(out, "{name},{:.6},{:.6},{:.6},{:.6}", r.accuracy, r.precision, r.recall, r.f1);
    }
    out
}

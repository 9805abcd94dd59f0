//! Minimal static SVG plots: precision/recall envelopes and score
//! histograms.

use std::fmt::Write as _;

use crate::metrics::{PrCurve, ScoreDistribution};

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn sx(v: f64) -> f64 {
    PAD + v * (W - 2.0 * PAD)
}

fn sy(v: f64) -> f64 {
    H - PAD - v * (H - 2.0 * PAD)
}

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>
<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{x_label}</text>
<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{y_label}</text>
"#,
        W / 2.0,
        W / 2.0,
        H - 8.0,
        H / 2.0,
        H / 2.0,
        b = H - PAD,
        r = W - PAD,
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v}</text><text x="{}" y="{}" text-anchor="end">{v}</text>"#,
            sx(v),
            H - PAD + 14.0,
            PAD - 4.0,
            sy(v) + 4.0
        );
    }
    s
}

/// Interpolated precision envelopes as step lines, one colour per curve.
pub fn pr_curves(title: &str, curves: &[(String, &PrCurve)]) -> String {
    let mut s = frame(title, "recall", "precision");
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut path = String::new();
        let mut recall = 0.0;
        for (p, env) in curve.points().iter().zip(curve.envelope()) {
            if p.recall > recall || path.is_empty() {
                let _ = write!(
                    path,
                    "{}{:.2},{:.2} ",
                    if path.is_empty() { "M" } else { "L" },
                    sx(recall),
                    sy(*env)
                );
                let _ = write!(path, "L{:.2},{:.2} ", sx(p.recall), sy(*env));
                recall = p.recall;
            }
        }
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.trim_end()
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * i as f64,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Per-group score histograms normalised to each group's count.
pub fn score_histograms(title: &str, dist: &ScoreDistribution) -> String {
    let mut s = frame(title, "score", "fraction of detections");
    let groups: Vec<_> = dist.groups.iter().filter(|g| g.count > 0).collect();
    let bar = 1.0 / dist.bins as f64 / groups.len().max(1) as f64;
    let peak = groups
        .iter()
        .flat_map(|g| g.histogram.iter().map(move |&n| n as f64 / g.count as f64))
        .fold(0.0, f64::max)
        .max(1e-12);
    for (gi, g) in groups.iter().enumerate() {
        let color = COLORS[gi % COLORS.len()];
        for (b, &n) in g.histogram.iter().enumerate() {
            let v = n as f64 / g.count as f64 / peak;
            let x0 = b as f64 / dist.bins as f64 + gi as f64 * bar;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                sx(x0),
                sy(v),
                sx(x0 + bar) - sx(x0),
                sy(0.0) - sy(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 80.0,
            PAD + 14.0 * gi as f64,
            g.group
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

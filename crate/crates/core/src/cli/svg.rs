//! Minimal SVG line charts and heatmaps. Coordinates are printed with fixed
//! precision so identical inputs give identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 40.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

pub struct Line {
    pub label: String,
    pub color: &'static str,
    pub values: Vec<f64>,
}

/// Shaded x-range `[start, start + len)` in sample units.
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub color: &'static str,
}

pub struct Panel {
    pub title: String,
    pub lines: Vec<Line>,
    pub spans: Vec<Span>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN_LEFT:.0}" y="18" font-size="14">{}</text>"#, escape(title));
}

fn bounds(lines: &[Line]) -> (f64, f64) {
    let (lo, hi) = lines
        .iter()
        .flat_map(|l| l.values.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn panel(out: &mut String, p: &Panel, top: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - 30.0;
    let n = p.lines.iter().map(|l| l.values.len()).max().unwrap_or(0).max(2);
    let (lo, hi) = bounds(&p.lines);
    let x = |i: f64| MARGIN_LEFT + plot_w * i / (n - 1) as f64;
    let y = |v: f64| top + plot_h * (1.0 - (v - lo) / (hi - lo));

    let _ = writeln!(out, r#"<text x="{MARGIN_LEFT:.0}" y="{:.2}">{}</text>"#, top - 6.0, escape(&p.title));
    for s in &p.spans {
        let x0 = x(s.start as f64);
        let x1 = x((s.start + s.len).saturating_sub(1) as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{plot_h:.2}" fill="{}" fill-opacity="0.2"/>"#,
            (x1 - x0).max(1.0),
            s.color
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT:.0}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="gray"/>"#
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{hi:.3}</text>"#, MARGIN_LEFT - 4.0, top + 10.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{lo:.3}</text>"#, MARGIN_LEFT - 4.0, top + plot_h);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">0</text>"#, MARGIN_LEFT, top + plot_h + 14.0);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        MARGIN_LEFT + plot_w,
        top + plot_h + 14.0,
        n - 1
    );

    for (li, line) in p.lines.iter().enumerate() {
        // Non-finite values break the polyline into pieces.
        let mut pieces: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (i, &v) in line.values.iter().enumerate() {
            if v.is_finite() {
                pieces.last_mut().expect("non-empty").push((x(i as f64), y(v)));
            } else if !pieces.last().expect("non-empty").is_empty() {
                pieces.push(Vec::new());
            }
        }
        for piece in pieces.iter().filter(|p| !p.is_empty()) {
            let points: Vec<String> = piece.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                points.join(" "),
                line.color
            );
        }
        let ly = top + 12.0 + 14.0 * li as f64;
        let lx = MARGIN_LEFT + plot_w + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 16.0,
            ly - 4.0,
            line.color
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 20.0, escape(&line.label));
    }
}

/// Stacked line-chart panels sharing one title.
pub fn line_panels(title: &str, panels: &[Panel]) -> String {
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + GAP);
    let mut out = String::new();
    header(&mut out, height, title);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, MARGIN_TOP + GAP / 2.0 + i as f64 * (PANEL_HEIGHT + GAP));
    }
    out.push_str("</svg>\n");
    out
}

/// White → blue → red ramp over `t ∈ [0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (255.0 * (1.0 - u) + 49.0 * u, 255.0 * (1.0 - u) + 130.0 * u, 255.0 * (1.0 - u) + 189.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (49.0 * (1.0 - u) + 214.0 * u, 130.0 * (1.0 - u) + 39.0 * u, 189.0 * (1.0 - u) + 40.0 * u)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Grid heatmap; `cells[row][col]`, blank where absent.
pub fn heatmap(title: &str, row_labels: &[&str], col_labels: &[&str], cells: &[Vec<Option<f64>>]) -> String {
    let cell_w = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / col_labels.len().max(1) as f64;
    let cell_h = 28.0;
    let height = MARGIN_TOP + 30.0 + cell_h * row_labels.len() as f64 + 20.0;
    let mut out = String::new();
    header(&mut out, height, title);
    let values: Vec<f64> = cells.iter().flatten().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top = MARGIN_TOP + 20.0;
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + cell_w * (c as f64 + 0.5),
            top - 6.0,
            escape(label)
        );
    }
    for (r, label) in row_labels.iter().enumerate() {
        let y = top + cell_h * r as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + cell_h / 2.0 + 4.0,
            escape(label)
        );
        for c in 0..col_labels.len() {
            let x = MARGIN_LEFT + cell_w * c as f64;
            let value = cells.get(r).and_then(|row| row.get(c)).copied().flatten();
            let fill = match value {
                Some(v) if v.is_finite() => {
                    let t = if hi - lo > 1e-12 { (v - lo) / (hi - lo) } else { 0.5 };
                    ramp(t)
                }
                _ => "#eeeeee".to_string(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{fill}" stroke="white"/>"#
            );
            if let Some(v) = value {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9">{v:.1}</text>"#,
                    x + cell_w / 2.0,
                    y + cell_h / 2.0 + 3.0
                );
            }
        }
    }
    if lo.is_finite() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">range {lo:.3} to {hi:.3}</text>"#,
            MARGIN_LEFT,
            top + cell_h * row_labels.len() as f64 + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_skips_non_finite_points() {
        let svg = line_panels(
            "t",
            &[Panel {
                title: "p".into(),
                lines: vec![Line {
                    label: "a".into(),
                    color: PALETTE[0],
                    values: vec![1.0, 2.0, f64::NAN, 3.0, 4.0],
                }],
                spans: vec![Span { start: 1, len: 2, color: "red" }],
            }],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn heatmap_marks_missing_cells() {
        let svg = heatmap("h", &["a", "b"], &["x", "y"], &[vec![Some(1.0), None], vec![Some(3.0), Some(2.0)]]);
        assert_eq!(svg.matches("#eeeeee").count(), 1);
        assert_eq!(svg.matches("<rect").count(), 1 + 4);
    }

    #[test]
    fn titles_are_escaped() {
        assert!(line_panels("a<b & c", &[]).contains("a&lt;b &amp; c"));
    }
}

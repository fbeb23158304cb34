use std::fmt::Write as _;
use std::path::Path;

use super::{Aggregate, ExperimentReport, Method};
use crate::error::{Error, Result};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 80.0;
const LEGEND_H: f64 = 50.0;

fn color(m: Method) -> &'static str {
    match m {
        Method::Efcp => "#d62728",
        Method::Vfcp => "#1f77b4",
        Method::Linear => "#2ca02c",
        Method::Naive => "#9467bd",
    }
}

/// A series value with its standard error.
#[derive(Clone, Copy)]
struct Point {
    d: usize,
    mean: f64,
    se: f64,
}

struct Panel {
    title: String,
    series: Vec<(Method, Vec<Point>)>,
    y_min: f64,
    y_max: f64,
    reference: Option<f64>,
}

fn finite_or(v: f64, fallback: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        fallback
    }
}

fn methods_of(aggs: &[Aggregate]) -> Vec<Method> {
    let mut out = Vec::new();
    for a in aggs {
        if !out.contains(&a.method) {
            out.push(a.method);
        }
    }
    out
}

fn coverage_panel(report: &ExperimentReport, alpha: f64) -> Panel {
    let series = methods_of(&report.aggregates)
        .into_iter()
        .map(|m| {
            let pts = report
                .aggregates
                .iter()
                .filter(|a| a.method == m)
                .map(|a| Point {
                    d: a.d,
                    mean: a.mean_coverage,
                    se: finite_or(a.se_coverage, 0.0),
                })
                .collect();
            (m, pts)
        })
        .collect();
    Panel {
        title: "Coverage".into(),
        series,
        y_min: 0.0,
        y_max: 1.0,
        reference: Some(1.0 - alpha),
    }
}

/// Width of each method divided by the VFCP width at the same `d`; raw
/// widths when VFCP is absent.
fn width_panel(report: &ExperimentReport) -> Panel {
    let has_vfcp = report.aggregates.iter().any(|a| a.method == Method::Vfcp);
    let base = |d: usize| -> f64 {
        if !has_vfcp {
            return 1.0;
        }
        report
            .aggregate_for(Method::Vfcp, d)
            .map_or(f64::NAN, |a| a.mean_width)
    };
    let series: Vec<(Method, Vec<Point>)> = methods_of(&report.aggregates)
        .into_iter()
        .map(|m| {
            let pts = report
                .aggregates
                .iter()
                .filter(|a| a.method == m)
                .map(|a| {
                    let b = base(a.d);
                    if m == Method::Vfcp && has_vfcp {
                        Point {
                            d: a.d,
                            mean: 1.0,
                            se: finite_or(a.se_width / b, 0.0),
                        }
                    } else {
                        Point {
                            d: a.d,
                            mean: a.mean_width / b,
                            se: finite_or(a.se_width / b, 0.0),
                        }
                    }
                })
                .collect();
            (m, pts)
        })
        .collect();
    let top = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|p| p.mean.is_finite())
        .map(|p| p.mean + p.se)
        .fold(0.0_f64, f64::max);
    Panel {
        title: if has_vfcp { "Width ratio to VFCP".into() } else { "Width".into() },
        series,
        y_min: 0.0,
        y_max: if top > 0.0 { top * 1.1 } else { 1.0 },
        reference: has_vfcp.then_some(1.0),
    }
}

/// Renders the two-panel figure as a standalone SVG document.
pub fn render_svg(report: &ExperimentReport, alpha: f64) -> Result<String> {
    if report.aggregates.is_empty() {
        return Err(Error::config("report has no aggregates to plot"));
    }
    let mut dims: Vec<usize> = report.aggregates.iter().map(|a| a.d).collect();
    dims.sort_unstable();
    dims.dedup();
    let methods = methods_of(&report.aggregates);

    let total_w = MARGIN_L + 2.0 * PANEL_W + GAP + 30.0;
    let total_h = MARGIN_T + PANEL_H + 50.0 + LEGEND_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{total_w}" height="{total_h}" fill="white"/>"#);

    for (i, panel) in [coverage_panel(report, alpha), width_panel(report)].iter().enumerate() {
        let x0 = MARGIN_L + i as f64 * (PANEL_W + GAP);
        draw_panel(&mut svg, panel, x0, MARGIN_T, &dims);
    }

    let ly = MARGIN_T + PANEL_H + 50.0;
    for (i, m) in methods.iter().enumerate() {
        let lx = MARGIN_L + i as f64 * 110.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="14" height="14" fill="{}"/>"#,
            ly - 11.0,
            color(*m)
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{m}</text>"#, lx + 20.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn draw_panel(svg: &mut String, p: &Panel, x0: f64, y0: f64, dims: &[usize]) {
    let sy = |v: f64| y0 + PANEL_H * (1.0 - (v.clamp(p.y_min, p.y_max) - p.y_min) / (p.y_max - p.y_min));
    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 12.0,
        p.title
    );
    for k in 0..=4 {
        let v = p.y_min + (p.y_max - p.y_min) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            x0 + PANEL_W
        );
    }

    let n_methods = p.series.len().max(1);
    if dims.len() == 1 {
        let slot = PANEL_W / n_methods as f64;
        for (j, (m, pts)) in p.series.iter().enumerate() {
            let Some(pt) = pts.first().filter(|pt| pt.mean.is_finite()) else { continue };
            let bx = x0 + j as f64 * slot + slot * 0.2;
            let bw = slot * 0.6;
            let top = sy(pt.mean);
            let _ = writeln!(
                svg,
                r#"<rect class="bar" x="{bx}" y="{top}" width="{bw}" height="{}" fill="{}" fill-opacity="0.8"/>"#,
                sy(p.y_min) - top,
                color(*m)
            );
            let cx = bx + bw / 2.0;
            let _ = writeln!(
                svg,
                r#"<line class="se" x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
                sy(pt.mean - pt.se),
                sy(pt.mean + pt.se)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{cx}" y="{}" text-anchor="middle">{m}</text>"#,
                y0 + PANEL_H + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">d = {}</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H + 34.0,
            dims[0]
        );
    } else {
        let (dmin, dmax) = (dims[0] as f64, dims[dims.len() - 1] as f64);
        let sx = |d: usize| x0 + PANEL_W * (d as f64 - dmin) / (dmax - dmin);
        for &d in dims {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{d}</text>"#,
                sx(d),
                y0 + PANEL_H + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">d</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H + 34.0
        );
        for (m, pts) in &p.series {
            let pts: Vec<&Point> = pts.iter().filter(|pt| pt.mean.is_finite()).collect();
            if pts.is_empty() {
                continue;
            }
            let upper: Vec<String> = pts.iter().map(|pt| format!("{},{}", sx(pt.d), sy(pt.mean + pt.se))).collect();
            let lower: Vec<String> = pts
                .iter()
                .rev()
                .map(|pt| format!("{},{}", sx(pt.d), sy(pt.mean - pt.se)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon class="ribbon" points="{} {}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" "),
                color(*m)
            );
            let line: Vec<String> = pts.iter().map(|pt| format!("{},{}", sx(pt.d), sy(pt.mean))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                line.join(" "),
                color(*m)
            );
        }
    }

    if let Some(r) = p.reference {
        let y = sy(r);
        let _ = writeln!(
            svg,
            r#"<line class="reference" x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-dasharray="6,4" data-value="{r}"/>"#,
            x0 + PANEL_W
        );
    }
    svg.push_str("</g>\n");
}

/// Writes the coverage and width-ratio figure to `path`.
pub fn emit_plot(report: &ExperimentReport, path: impl AsRef<Path>, alpha: f64) -> Result<()> {
    let path = path.as_ref();
    let svg = render_svg(report, alpha)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::ExperimentRow;
    use super::*;

    fn report(dims: &[usize]) -> ExperimentReport {
        let mut rows = Vec::new();
        for rep in 0..3 {
            for (m, w) in [(Method::Efcp, 2.0), (Method::Vfcp, 2.5), (Method::Linear, 1.0)] {
                for &d in dims {
                    rows.push(ExperimentRow {
                        rep,
                        method: m,
                        d,
                        coverage: 0.85 + 0.02 * rep as f64,
                        width: w + 0.1 * rep as f64,
                        threshold: w / 2.0,
                        chosen: String::new(),
                        runtime_ms: 0.0,
                        error: None,
                    });
                }
            }
        }
        ExperimentReport::from_rows(rows)
    }

    /// Minimal well-formedness check: tags nest and close properly.
    pub(crate) fn well_formed(svg: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = svg;
        while let Some(start) = rest.find('<') {
            let Some(end) = rest[start..].find('>') else { return false };
            let tag = &rest[start + 1..start + end];
            rest = &rest[start + end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop().as_deref() != Some(name.trim()) {
                    return false;
                }
            } else if !tag.ends_with('/') {
                let name = tag.split_whitespace().next().unwrap_or("").to_string();
                stack.push(name);
            }
        }
        stack.is_empty()
    }

    #[test]
    fn line_plot_is_well_formed_with_reference() {
        let svg = render_svg(&report(&[10, 20, 40]), 0.1).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(well_formed(&svg));
        assert!(svg.contains(r#"data-value="0.9""#));
        assert_eq!(svg.matches("class=\"ribbon\"").count(), 6);
        assert!(!svg.contains("class=\"bar\""));
    }

    #[test]
    fn single_dimension_uses_bars() {
        let svg = render_svg(&report(&[10]), 0.1).unwrap();
        assert!(well_formed(&svg));
        assert_eq!(svg.matches("class=\"bar\"").count(), 6);
    }

    #[test]
    fn vfcp_ratio_is_one() {
        let r = report(&[10, 20]);
        let panel = width_panel(&r);
        let (_, vf) = panel.series.iter().find(|(m, _)| *m == Method::Vfcp).unwrap();
        assert!(vf.iter().all(|p| p.mean == 1.0));
    }

    #[test]
    fn empty_report_is_rejected() {
        let r = ExperimentReport::from_rows(Vec::new());
        assert!(render_svg(&r, 0.1).is_err());
    }
}

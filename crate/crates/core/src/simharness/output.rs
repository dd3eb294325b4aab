//! CSV, JSON and SVG files for experiment results.
//!
//! Files carry no timings, so a rerun with the same configuration produces
//! byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentKind, ExperimentResult};
use crate::error::{Error, Result};

pub const COVERAGE_HEADER: &str = "n,method,cum_miscoverage,mean_halfwidth";
pub const POWER_HEADER: &str = "delta,method,power";
pub const REJECTION_HEADER: &str = "n,delta,method,cum_rejection";
pub const SENSITIVITY_HEADER: &str = "n,scheme,param,width";

/// A named polyline for [`line_chart_svg`].
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn coverage_csv(res: &ExperimentResult, m: u64) -> String {
    let rows = res.coverage.iter().filter(|c| c.m == m).flat_map(|c| {
        c.cum_miscoverage
            .iter()
            .zip(&c.mean_halfwidth)
            .enumerate()
            .map(move |(i, (mc, hw))| format!("{},{},{mc},{hw}", c.n_start + i as u64, c.method))
    });
    csv(COVERAGE_HEADER, rows)
}

fn power_csv(res: &ExperimentResult) -> String {
    csv(
        POWER_HEADER,
        res.power.iter().map(|p| format!("{},{},{}", p.delta, p.method, p.power)),
    )
}

fn rejection_csv(res: &ExperimentResult) -> String {
    let rows = res.rejection.iter().flat_map(|c| {
        c.cum_rejection
            .iter()
            .enumerate()
            .map(move |(i, r)| format!("{},{},{},{r}", c.n_start + i as u64, c.delta, c.method))
    });
    csv(REJECTION_HEADER, rows)
}

fn sensitivity_csv(res: &ExperimentResult, method: crate::sequences::Method) -> String {
    let rows = res.sensitivity.iter().filter(|c| c.method == method).flat_map(|c| {
        let param = c.scheme.param().map(|p| p.to_string()).unwrap_or_default();
        c.ns
            .iter()
            .zip(&c.width)
            .map(move |(n, w)| format!("{n},{},{param},{w}", c.scheme.name()))
    });
    csv(SENSITIVITY_HEADER, rows)
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

/// Writes `config.json`, the CSV files and one SVG chart per curve family
/// into `dir` (created if missing). Returns the paths written.
pub fn write_result(res: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    write(dir, "config.json", &(res.config.to_json() + "\n"), &mut out)?;

    let cold_starts = res.config.cold_starts();
    let per_m = res.config.experiment == ExperimentKind::Coldstart;
    for &m in &cold_starts {
        if !res.coverage.iter().any(|c| c.m == m) {
            continue;
        }
        let suffix = if per_m { format!("_m{m}") } else { String::new() };
        write(dir, &format!("coverage{suffix}.csv"), &coverage_csv(res, m), &mut out)?;
        let curves = res.coverage.iter().filter(|c| c.m == m);
        let miss: Vec<Series> = curves
            .clone()
            .map(|c| Series {
                label: c.method.to_string(),
                points: indexed(c.n_start, &c.cum_miscoverage),
            })
            .collect();
        let width: Vec<Series> = curves
            .map(|c| Series {
                label: c.method.to_string(),
                points: indexed(c.n_start, &c.mean_halfwidth),
            })
            .collect();
        let title = |what: &str| format!("{what} (m = {m})");
        write(
            dir,
            &format!("miscoverage{suffix}.svg"),
            &line_chart_svg(&title("cumulative miscoverage"), "n", "rate", &miss),
            &mut out,
        )?;
        write(
            dir,
            &format!("halfwidth{suffix}.svg"),
            &line_chart_svg(&title("mean half-width"), "n", "half-width", &width),
            &mut out,
        )?;
    }

    if !res.power.is_empty() {
        write(dir, "power.csv", &power_csv(res), &mut out)?;
        write(dir, "rejection.csv", &rejection_csv(res), &mut out)?;
        let mut methods: Vec<_> = res.power.iter().map(|p| p.method).collect();
        methods.dedup();
        methods.sort();
        methods.dedup();
        let series: Vec<Series> = methods
            .iter()
            .map(|&m| Series {
                label: m.to_string(),
                points: res
                    .power
                    .iter()
                    .filter(|p| p.method == m)
                    .map(|p| (p.delta, p.power))
                    .collect(),
            })
            .collect();
        write(
            dir,
            "power.svg",
            &line_chart_svg("rejection rate by n_max", "delta", "power", &series),
            &mut out,
        )?;
        let size: Vec<Series> = res
            .rejection
            .iter()
            .filter(|c| c.delta == 0.0)
            .map(|c| Series {
                label: c.method.to_string(),
                points: indexed(c.n_start, &c.cum_rejection),
            })
            .collect();
        if !size.is_empty() {
            write(
                dir,
                "size.svg",
                &line_chart_svg("cumulative rejection under the null", "n", "rate", &size),
                &mut out,
            )?;
        }
    }

    let mut methods: Vec<_> = res.sensitivity.iter().map(|c| c.method).collect();
    methods.sort();
    methods.dedup();
    for &method in &methods {
        let suffix = if methods.len() > 1 {
            format!("_{}", method.as_str().to_ascii_lowercase())
        } else {
            String::new()
        };
        write(dir, &format!("sensitivity{suffix}.csv"), &sensitivity_csv(res, method), &mut out)?;
        let series: Vec<Series> = res
            .sensitivity
            .iter()
            .filter(|c| c.method == method)
            .map(|c| Series {
                label: c.scheme.to_string(),
                points: c.ns.iter().map(|&n| n as f64).zip(c.width.iter().copied()).collect(),
            })
            .collect();
        write(
            dir,
            &format!("sensitivity{suffix}.svg"),
            &line_chart_svg(&format!("{method} width by weight scheme"), "n", "width", &series),
            &mut out,
        )?;
    }
    Ok(out)
}

fn indexed(start: u64, ys: &[f64]) -> Vec<(f64, f64)> {
    ys.iter()
        .enumerate()
        .map(|(i, &y)| ((start + i as u64) as f64, y))
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plain SVG line chart with linear axes, min/max tick labels and a legend.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 170.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;

    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}" text-anchor="start">{}</text>"#,
        TOP + ph + 16.0,
        fmt_tick(x0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        LEFT + pw,
        TOP + ph + 16.0,
        fmt_tick(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        LEFT - 6.0,
        TOP + ph,
        fmt_tick(y0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        LEFT - 6.0,
        TOP + 10.0,
        fmt_tick(y1)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_polyline_per_series() {
        let s = vec![
            Series {
                label: "a<b".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0)],
            },
            Series {
                label: "c".into(),
                points: vec![(0.0, f64::NAN)],
            },
        ];
        let svg = line_chart_svg("t", "x", "y", &s);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.ends_with("</svg>\n"));
    }
}

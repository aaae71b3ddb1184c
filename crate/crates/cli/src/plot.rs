//! Self-contained SVG plots: welfare-versus-budget curves, learning curves,
//! and assignment histograms.

use std::fmt::Write as _;
use std::path::Path;

use rmdp_core::{Error, Result};

use crate::runio::{read_assignment_csv, CsvTable};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 440.0;
pub const MARGIN_LEFT: f64 = 62.0;
pub const MARGIN_RIGHT: f64 = 24.0;
pub const MARGIN_TOP: f64 = 32.0;
pub const MARGIN_BOTTOM: f64 = 52.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// 1-D affine map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub fn new(domain: (f64, f64), range: (f64, f64)) -> Self {
        let span = domain.1 - domain.0;
        let scale = if span.abs() < 1e-12 {
            0.0
        } else {
            (range.1 - range.0) / span
        };
        Self { scale, offset: range.0 - domain.0 * scale }
    }

    pub fn map(&self, x: f64) -> f64 {
        // Degenerate domains land mid-range.
        if self.scale == 0.0 {
            self.offset
        } else {
            self.offset + self.scale * x
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error-bar half-heights, one per point.
    pub errors: Option<Vec<f64>>,
}

fn fmt_coord(x: f64) -> String {
    format!("{x:.2}")
}

/// Multi-series line chart with optional error bars and a dashed horizontal
/// reference line.
pub fn line_chart_svg(
    series: &[Series],
    x_label: &str,
    y_label: &str,
    reference: Option<f64>,
    title: &str,
    meta: &str,
) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::invalid("nothing to plot: empty series"));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            xs.push(x);
            let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
            ys.push(y - e);
            ys.push(y + e);
        }
    }
    if let Some(r) = reference {
        ys.push(r);
    }
    let min_max = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (hi - lo).abs() < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    };
    let (x_lo, x_hi) = min_max(&xs);
    let (y_lo, y_hi) = {
        let (lo, hi) = min_max(&ys);
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    };
    let x_map = Affine::new((x_lo, x_hi), (MARGIN_LEFT, WIDTH - MARGIN_RIGHT));
    let y_map = Affine::new((y_lo, y_hi), (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, "<!-- {meta} -->");
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="20" font-size="14" text-anchor="middle" font-family="sans-serif">{title}</text>"#,
        WIDTH / 2.0
    );

    // Axes.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * tick as f64 / 4.0;
        let px = x_map.map(fx);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle" font-family="sans-serif">{fx:.3}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        );
        let fy = y_lo + (y_hi - y_lo) * tick as f64 / 4.0;
        let py = y_map.map(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end" font-family="sans-serif">{fy:.3}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {:.2})">{y_label}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    if let Some(r) = reference {
        let py = y_map.map(r);
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="black" stroke-dasharray="6 4"/>"#
        );
    }

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_coord(x_map.map(x)), fmt_coord(y_map.map(y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let px = x_map.map(x);
            let py = y_map.map(y);
            let _ = writeln!(svg, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#);
            if let Some(errors) = &s.errors {
                let lo = y_map.map(y - errors[i]);
                let hi = y_map.map(y + errors[i]);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{px:.2}" y1="{lo:.2}" x2="{px:.2}" y2="{hi:.2}" stroke="{color}"/>"#
                );
            }
        }
        let ly = MARGIN_TOP + 14.0 * si as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="3" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">{}</text>"#,
            x1 - 110.0,
            ly,
            x1 - 96.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Stacked per-representative histogram of agent target velocities.
pub fn velocity_histogram_svg(
    targets: &[f64],
    labels: &[usize],
    k: usize,
    meta: &str,
) -> Result<String> {
    if targets.is_empty() || targets.len() != labels.len() {
        return Err(Error::invalid("histogram needs one target per agent"));
    }
    let hi = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(1e-9);
    let bins = 25usize;
    let mut counts = vec![vec![0usize; bins]; k];
    for (&t, &l) in targets.iter().zip(labels) {
        let b = (((t / hi) * bins as f64) as usize).min(bins - 1);
        counts[l][b] += 1;
    }
    let tallest = (0..bins)
        .map(|b| (0..k).map(|j| counts[j][b]).sum::<usize>())
        .max()
        .unwrap()
        .max(1);

    let x_map = Affine::new((0.0, bins as f64), (MARGIN_LEFT, WIDTH - MARGIN_RIGHT));
    let y_map = Affine::new((0.0, tallest as f64), (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP));
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, "<!-- {meta} -->");
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let base = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{base}" x2="{:.2}" y2="{base}" stroke="black"/>"#,
        WIDTH - MARGIN_RIGHT
    );
    for b in 0..bins {
        let x = x_map.map(b as f64);
        let w = x_map.map(b as f64 + 1.0) - x - 1.0;
        let mut stack = 0usize;
        for j in 0..k {
            if counts[j][b] == 0 {
                continue;
            }
            let y_top = y_map.map((stack + counts[j][b]) as f64);
            let y_bot = y_map.map(stack as f64);
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{y_top:.2}" width="{w:.2}" height="{:.2}" fill="{}"/>"#,
                y_bot - y_top,
                PALETTE[j % PALETTE.len()]
            );
            stack += counts[j][b];
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif">target velocity</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    for j in 0..k {
        let ly = MARGIN_TOP + 14.0 * j as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{ly:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">rep {j}</text>"#,
            WIDTH - MARGIN_RIGHT - 110.0,
            PALETTE[j % PALETTE.len()],
            WIDTH - MARGIN_RIGHT - 96.0,
            ly + 9.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Tile-ownership grid for the gridworld: each cell colored by the
/// representative that serves its agent.
pub fn grid_ownership_svg(labels: &[usize], side: usize, meta: &str) -> Result<String> {
    if labels.len() != side * side {
        return Err(Error::invalid(format!(
            "{} labels for a {side}x{side} grid",
            labels.len()
        )));
    }
    let cell = 64.0;
    let size = cell * side as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(svg, "<!-- {meta} -->");
    for row in 0..side {
        for col in 0..side {
            let label = labels[row * side + col];
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell}" height="{cell}" fill="{}" stroke="white"/><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" font-family="sans-serif" fill="white">{label}</text>"#,
                col as f64 * cell,
                row as f64 * cell,
                PALETTE[label % PALETTE.len()],
                col as f64 * cell + cell / 2.0,
                row as f64 * cell + cell / 2.0 + 4.0
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SwVsK,
    LearningCurve,
    AssignmentHistogram,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sw_vs_k" => Ok(PlotKind::SwVsK),
            "learning_curve" => Ok(PlotKind::LearningCurve),
            "assignment_histogram" => Ok(PlotKind::AssignmentHistogram),
            other => Err(Error::invalid(format!("unknown plot kind `{other}`"))),
        }
    }
}

/// Renders `input` (an aggregate CSV, progress CSV, or assignment CSV) to an
/// SVG file. Nothing is written when rendering fails.
pub fn plot_file(input: &Path, kind: PlotKind, out: &Path, reference: Option<f64>) -> Result<()> {
    let svg = match kind {
        PlotKind::SwVsK => {
            let table = CsvTable::read(input)?;
            let meta = table.meta.clone().unwrap_or_default();
            let algo_col = table.column("algo")?;
            let k_col = table.column("k")?;
            let mean_col = table.column("mean_sw")?;
            let se_col = table.column("se_sw")?;
            let mut algos: Vec<String> = Vec::new();
            for row in &table.rows {
                if !algos.contains(&row[algo_col]) {
                    algos.push(row[algo_col].clone());
                }
            }
            let mut series = Vec::new();
            for algo in algos {
                let mut points = Vec::new();
                let mut errors = Vec::new();
                for r in 0..table.rows.len() {
                    if table.rows[r][algo_col] != algo {
                        continue;
                    }
                    points.push((table.f64_at(r, k_col)?, table.f64_at(r, mean_col)?));
                    errors.push(table.f64_at(r, se_col)?);
                }
                points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                series.push(Series { label: algo, points, errors: Some(errors) });
            }
            line_chart_svg(
                &series,
                "policy budget k",
                "social welfare",
                reference,
                "social welfare vs policy budget",
                &meta,
            )?
        }
        PlotKind::LearningCurve => {
            let table = CsvTable::read(input)?;
            let meta = table.meta.clone().unwrap_or_default();
            let x_col = table.column("transitions_per_policy")?;
            let y_col = table.column("social_welfare")?;
            let mut points = Vec::new();
            for r in 0..table.rows.len() {
                points.push((table.f64_at(r, x_col)?, table.f64_at(r, y_col)?));
            }
            let algo = table
                .rows
                .first()
                .map(|r| r[table.column("algo").unwrap_or(2)].clone())
                .unwrap_or_else(|| "run".into());
            line_chart_svg(
                &[Series { label: algo, points, errors: None }],
                "transitions per policy",
                "social welfare",
                reference,
                "learning curve",
                &meta,
            )?
        }
        PlotKind::AssignmentHistogram => {
            let alpha = read_assignment_csv(input)?;
            let labels = alpha.labels();
            let meta = std::fs::read_to_string(input)
                .ok()
                .and_then(|t| t.lines().next().map(|l| l.trim_start_matches('#').trim().to_string()))
                .unwrap_or_default();
            let targets_path = input.parent().map(|p| p.join("targets.csv"));
            match targets_path.filter(|p| p.exists()) {
                Some(path) => {
                    let table = CsvTable::read(&path)?;
                    let t_col = table.column("target")?;
                    let mut targets = Vec::with_capacity(table.rows.len());
                    for r in 0..table.rows.len() {
                        targets.push(table.f64_at(r, t_col)?);
                    }
                    velocity_histogram_svg(&targets, &labels, alpha.k(), &meta)?
                }
                None => {
                    let side = (labels.len() as f64).sqrt() as usize;
                    if side * side != labels.len() {
                        return Err(Error::invalid(
                            "assignment is not a square grid and no targets.csv found",
                        ));
                    }
                    grid_ownership_svg(&labels, side, &meta)?
                }
            }
        }
    };
    std::fs::write(out, svg)?;
    Ok(())
}

//! SVG 1.1 charts of one objective column over a sweep.
//!
//! Rows are grouped by regime, one panel per group. Two varying parameter
//! columns give a heatmap, one gives a line chart. Colors are linear between
//! the panel's minimum and maximum; rows without an equilibrium are grey.

use std::fmt::Write as _;

use thiserror::Error;

use xdl_core::policy::argmax_level;

use crate::table::{fmt_sig, CsvError, Table};

/// Parameter columns that can act as plot axes, in preference order.
pub const AXIS_COLUMNS: [&str; 6] = ["v", "gamma", "t", "beta", "c0", "x_bar"];

const LOW: [f64; 3] = [247.0, 251.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];
const MISSING: &str = "#bdbdbd";
const CELL_W: f64 = 36.0;
const CELL_H: f64 = 24.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 56.0;
const RIGHT: f64 = 150.0;
const BOTTOM: f64 = 56.0;
const LINE_W: f64 = 480.0;
const LINE_H: f64 = 240.0;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("no data rows")]
    NoRows,
    #[error("regime `{regime}` varies {count} parameters; at most 2 can be plotted")]
    TooManyAxes { regime: String, count: usize },
}

struct Axis {
    name: String,
    values: Vec<f64>,
    /// Index into `values` for each row of the panel.
    index: Vec<usize>,
}

struct PanelData {
    regime: String,
    values: Vec<Option<f64>>,
    axes: Vec<Axis>,
}

fn color(value: f64, lo: f64, hi: f64) -> String {
    let s = if hi > lo {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c: Vec<u8> = (0..3)
        .map(|k| (LOW[k] + s * (HIGH[k] - LOW[k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(x: f64) -> String {
    fmt_sig(x, 4)
}

fn panels(table: &Table, column: &str) -> Result<Vec<PanelData>, PlotError> {
    if table.rows.is_empty() {
        return Err(PlotError::NoRows);
    }
    let objective = table.numbers(column)?;
    let existence = table.strings("existence")?;
    let regimes = table.strings("regime")?;
    let mut order: Vec<&str> = Vec::new();
    for r in &regimes {
        if !order.contains(r) {
            order.push(r);
        }
    }

    let mut out = Vec::new();
    for regime in order {
        let rows: Vec<usize> = (0..table.rows.len()).filter(|&k| regimes[k] == regime).collect();
        let values = rows
            .iter()
            .map(|&k| {
                if existence[k] == "none_pure" {
                    None
                } else {
                    objective[k]
                }
            })
            .collect();

        let mut axes = Vec::new();
        for name in AXIS_COLUMNS {
            let Ok(c) = table.column(name) else { continue };
            let first = &table.rows[rows[0]][c];
            if rows.iter().all(|&k| &table.rows[k][c] == first) {
                continue;
            }
            let numbers = table.numbers(name)?;
            let mut distinct: Vec<f64> = Vec::new();
            let mut index = Vec::new();
            for &k in &rows {
                let x = numbers[k].unwrap_or(f64::NAN);
                let i = match distinct.iter().position(|d| d.to_bits() == x.to_bits()) {
                    Some(i) => i,
                    None => {
                        distinct.push(x);
                        distinct.len() - 1
                    }
                };
                index.push(i);
            }
            axes.push(Axis {
                name: name.to_string(),
                values: distinct,
                index,
            });
        }
        if axes.len() > 2 {
            return Err(PlotError::TooManyAxes {
                regime: regime.to_string(),
                count: axes.len(),
            });
        }
        if axes.is_empty() {
            axes.push(Axis {
                name: "row".into(),
                values: (0..rows.len()).map(|k| k as f64).collect(),
                index: (0..rows.len()).collect(),
            });
        }
        // The axis that changes between consecutive rows is the inner one.
        if axes.len() == 2 && axes[0].index.get(1) == axes[0].index.first() {
            axes.swap(0, 1);
        }
        out.push(PanelData {
            regime: regime.to_string(),
            values,
            axes,
        });
    }
    Ok(out)
}

fn range(values: &[Option<f64>]) -> Option<(f64, f64)> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

fn legend(svg: &mut String, x: f64, y: f64, lo: f64, hi: f64) {
    for k in 0..5 {
        let v = lo + (hi - lo) * (4 - k) as f64 / 4.0;
        let yy = y + k as f64 * 18.0;
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{yy:.2}" width="14" height="14" fill="{}" stroke="#666666"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
            color(v, lo, hi),
            x + 20.0,
            yy + 11.0,
            label(v)
        );
    }
    let yy = y + 5.0 * 18.0;
    let _ = writeln!(
        svg,
        r##"<rect x="{x:.2}" y="{yy:.2}" width="14" height="14" fill="{MISSING}" stroke="#666666"/><text x="{:.2}" y="{:.2}" font-size="11">no equilibrium</text>"##,
        x + 20.0,
        yy + 11.0
    );
}

fn heatmap(svg: &mut String, panel: &PanelData, column: &str, y0: f64) -> f64 {
    let (inner, outer) = (&panel.axes[0], &panel.axes[1]);
    let (nx, ny) = (inner.values.len(), outer.values.len());
    let width = nx as f64 * CELL_W;
    let height = ny as f64 * CELL_H;
    let (lo, hi) = range(&panel.values).unwrap_or((0.0, 0.0));
    let best = argmax_level(&panel.values);

    let title = match best {
        Some(k) => format!(
            "{column} ({}): max {} at {}={}, {}={}",
            panel.regime,
            label(panel.values[k].unwrap_or(f64::NAN)),
            inner.name,
            label(inner.values[inner.index[k]]),
            outer.name,
            label(outer.values[outer.index[k]])
        ),
        None => format!("{column} ({}): no equilibrium", panel.regime),
    };
    let _ = writeln!(
        svg,
        r##"<text x="{LEFT:.2}" y="{:.2}" font-size="13">{}</text>"##,
        y0 + 24.0,
        escape(&title)
    );

    let top = y0 + TOP;
    // Background shows uncovered cells as missing.
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.2}" y="{top:.2}" width="{width:.2}" height="{height:.2}" fill="{MISSING}"/>"##
    );
    for (k, value) in panel.values.iter().enumerate() {
        let (i, j) = (inner.index[k], outer.index[k]);
        let x = LEFT + i as f64 * CELL_W;
        // Outer values grow upwards.
        let y = top + (ny - 1 - j) as f64 * CELL_H;
        let fill = value.map(|v| color(v, lo, hi)).unwrap_or_else(|| MISSING.to_string());
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{CELL_W:.2}" height="{CELL_H:.2}" fill="{fill}"/>"##
        );
    }
    if let Some(k) = best {
        let x = LEFT + inner.index[k] as f64 * CELL_W;
        let y = top + (ny - 1 - outer.index[k]) as f64 * CELL_H;
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            x + 1.0,
            y + 1.0,
            CELL_W - 2.0,
            CELL_H - 2.0
        );
    }

    let stride_x = nx.div_ceil(10);
    for (i, v) in inner.values.iter().enumerate().step_by(stride_x) {
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
            LEFT + (i as f64 + 0.5) * CELL_W,
            top + height + 14.0,
            label(*v)
        );
    }
    let stride_y = ny.div_ceil(10);
    for (j, v) in outer.values.iter().enumerate().step_by(stride_y) {
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
            LEFT - 6.0,
            top + (ny - 1 - j) as f64 * CELL_H + CELL_H / 2.0 + 4.0,
            label(*v)
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
        LEFT + width / 2.0,
        top + height + 34.0,
        escape(&inner.name)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
        LEFT - 52.0,
        top + height / 2.0,
        LEFT - 52.0,
        top + height / 2.0,
        escape(&outer.name)
    );
    legend(svg, LEFT + width + 24.0, top, lo, hi);
    TOP + height.max(6.0 * 18.0) + BOTTOM
}

fn line_chart(svg: &mut String, panel: &PanelData, column: &str, y0: f64) -> f64 {
    let axis = &panel.axes[0];
    let xs: Vec<f64> = axis.index.iter().map(|&i| axis.values[i]).collect();
    let (lo, hi) = range(&panel.values).unwrap_or((0.0, 0.0));
    let (xlo, xhi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let best = argmax_level(&panel.values);
    let top = y0 + TOP;
    let px = |x: f64| {
        if xhi > xlo {
            LEFT + (x - xlo) / (xhi - xlo) * LINE_W
        } else {
            LEFT + LINE_W / 2.0
        }
    };
    let py = |v: f64| {
        if hi > lo {
            top + LINE_H - (v - lo) / (hi - lo) * LINE_H
        } else {
            top + LINE_H / 2.0
        }
    };

    let title = match best {
        Some(k) => format!(
            "{column} ({}): max {} at {}={}",
            panel.regime,
            label(panel.values[k].unwrap_or(f64::NAN)),
            axis.name,
            label(xs[k])
        ),
        None => format!("{column} ({}): no equilibrium", panel.regime),
    };
    let _ = writeln!(
        svg,
        r##"<text x="{LEFT:.2}" y="{:.2}" font-size="13">{}</text>"##,
        y0 + 24.0,
        escape(&title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.2}" y="{top:.2}" width="{LINE_W:.2}" height="{LINE_H:.2}" fill="none" stroke="#666666"/>"##
    );

    let mut segment: Vec<String> = Vec::new();
    let flush = |svg: &mut String, segment: &mut Vec<String>| {
        if segment.len() > 1 {
            let _ = writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="#08306b" stroke-width="1.5"/>"##,
                segment.join(" ")
            );
        }
        segment.clear();
    };
    for (k, value) in panel.values.iter().enumerate() {
        match value {
            Some(v) => segment.push(format!("{:.2},{:.2}", px(xs[k]), py(*v))),
            None => flush(svg, &mut segment),
        }
    }
    flush(svg, &mut segment);
    for (k, value) in panel.values.iter().enumerate() {
        let (cy, fill) = match value {
            Some(v) => (py(*v), color(*v, lo, hi)),
            None => (top + LINE_H, MISSING.to_string()),
        };
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{cy:.2}" r="3.5" fill="{fill}" stroke="#08306b"/>"##,
            px(xs[k])
        );
    }
    if let Some(k) = best {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="7" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            px(xs[k]),
            py(panel.values[k].unwrap_or(lo))
        );
    }

    let _ = writeln!(
        svg,
        r##"<text x="{LEFT:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"##,
        top + LINE_H + 14.0,
        label(xlo),
        LEFT + LINE_W,
        top + LINE_H + 14.0,
        label(xhi)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
        LEFT - 6.0,
        top + LINE_H,
        label(lo),
        LEFT - 6.0,
        top + 8.0,
        label(hi)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
        LEFT + LINE_W / 2.0,
        top + LINE_H + 34.0,
        escape(&axis.name)
    );
    legend(svg, LEFT + LINE_W + 24.0, top, lo, hi);
    TOP + LINE_H + BOTTOM
}

/// Renders `column` of a sweep table.
pub fn render_svg(table: &Table, column: &str) -> Result<String, PlotError> {
    let panels = panels(table, column)?;
    let mut body = String::new();
    let mut y = 0.0;
    let mut width: f64 = LEFT + LINE_W + RIGHT;
    for panel in &panels {
        if panel.axes.len() == 2 {
            width = width.max(LEFT + panel.axes[0].values.len() as f64 * CELL_W + RIGHT);
            y += heatmap(&mut body, panel, column, y);
        } else {
            y += line_chart(&mut body, panel, column, y);
        }
    }
    let mut svg = String::new();
    let _ = writeln!(svg, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{y:.0}" viewBox="0 0 {width:.0} {y:.0}" font-family="sans-serif">"##
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    svg.push_str(&body);
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::write_csv;

    fn table(rows: &[(&str, &str, &str, &str, &str)]) -> Table {
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|(r, g, t, w, e)| {
                vec![
                    r.to_string(),
                    g.to_string(),
                    t.to_string(),
                    w.to_string(),
                    e.to_string(),
                ]
            })
            .collect();
        Table::parse(&write_csv(
            &["regime", "gamma", "t", "total_welfare", "existence"],
            &rows,
        ))
        .unwrap()
    }

    fn fills(svg: &str) -> Vec<String> {
        svg.lines()
            .filter(|l| l.starts_with("<rect x=") && l.contains(r##"width="36.00""##))
            .map(|l| {
                l.split("fill=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap()
                    .to_string()
            })
            .collect()
    }

    #[test]
    fn heatmap_marks_argmax_and_missing_cells() {
        let t = table(&[
            ("mandatory", "0", "1", "1", "unique"),
            ("mandatory", "0", "2", "3", "unique"),
            ("mandatory", "1", "1", "2", "none_pure"),
            ("mandatory", "1", "2", "3", "multiple"),
        ]);
        let svg = render_svg(&t, "total_welfare").unwrap();
        assert!(svg.contains("max 3 at t=2, gamma=0"));
        let f = fills(&svg);
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], color(1.0, 1.0, 3.0));
        assert_eq!(f[1], "#08306b");
        assert_eq!(f[2], MISSING);
    }

    #[test]
    fn constant_grid_is_single_color_with_first_argmax() {
        let t = table(&[
            ("mandatory", "0", "1", "5", "unique"),
            ("mandatory", "0", "2", "5", "unique"),
            ("mandatory", "1", "1", "5", "unique"),
            ("mandatory", "1", "2", "5", "unique"),
        ]);
        let svg = render_svg(&t, "total_welfare").unwrap();
        let f = fills(&svg);
        assert!(f.iter().all(|c| c == &f[0]));
        assert!(svg.contains("max 5 at t=1, gamma=0"));
    }

    #[test]
    fn one_axis_gives_line_chart() {
        let t = table(&[
            ("mandatory", "0", "1", "1", "unique"),
            ("mandatory", "0", "2", "4", "unique"),
            ("mandatory", "0", "3", "2", "unique"),
        ]);
        let svg = render_svg(&t, "total_welfare").unwrap();
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("max 4 at t=2"));
        assert_eq!(svg, render_svg(&t, "total_welfare").unwrap());
    }

    #[test]
    fn errors() {
        let t = table(&[]);
        assert_eq!(render_svg(&t, "total_welfare"), Err(PlotError::NoRows));
        let t = table(&[("mandatory", "0", "1", "1", "unique")]);
        assert!(matches!(
            render_svg(&t, "profit9"),
            Err(PlotError::Csv(CsvError::MissingColumn(_)))
        ));
    }
}

//! Running-optimum-versus-cost SVG, hand-drawn.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{atomic_write, quantile, RunTrace};
use crate::error::{Error, Result};
use crate::optimizer::Algorithm;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 70.0;
const ORACLE_COLOR: &str = "#d62728";

fn color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Mscbo => "#1f77b4",
        Algorithm::Cbo => "#2ca02c",
        Algorithm::Msbo => "#ff7f0e",
    }
}

/// Median and quartile curves of one algorithm at shared cost knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCurve {
    pub algorithm: Algorithm,
    /// `(cost, q1, median, q3)`, one entry per knot where some run has a
    /// running optimum.
    pub knots: Vec<(f64, f64, f64, f64)>,
}

/// Step-interpolated value of a trace at `cost`: the running optimum of the
/// last row whose cumulative cost does not exceed it.
fn value_at(trace: &RunTrace, cost: f64) -> Option<f64> {
    trace
        .rows
        .iter()
        .take_while(|r| r.total_cost <= cost)
        .last()
        .and_then(|r| r.running_optimum)
}

pub fn band_curves(traces: &[RunTrace]) -> Vec<BandCurve> {
    let mut by_alg: BTreeMap<Algorithm, Vec<&RunTrace>> = BTreeMap::new();
    for t in traces {
        by_alg.entry(t.algorithm).or_default().push(t);
    }
    by_alg
        .into_iter()
        .map(|(algorithm, ts)| {
            let mut costs: Vec<f64> = ts
                .iter()
                .flat_map(|t| t.rows.iter().map(|r| r.total_cost))
                .collect();
            costs.sort_by(f64::total_cmp);
            costs.dedup();
            let knots = costs
                .into_iter()
                .filter_map(|c| {
                    let mut vals: Vec<f64> = ts.iter().filter_map(|t| value_at(t, c)).collect();
                    vals.sort_by(f64::total_cmp);
                    Some((
                        c,
                        quantile(&vals, 0.25)?,
                        quantile(&vals, 0.5)?,
                        quantile(&vals, 0.75)?,
                    ))
                })
                .collect();
            BandCurve { algorithm, knots }
        })
        .collect()
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Step path through `(x, y)` points: horizontal then vertical moves.
fn step_path(f: &Frame, pts: &[(f64, f64)]) -> String {
    let mut d = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i == 0 {
            let _ = write!(d, "M{:.2} {:.2}", f.px(*x), f.py(*y));
        } else {
            let _ = write!(d, " H{:.2} V{:.2}", f.px(*x), f.py(*y));
        }
    }
    d
}

pub fn render_svg(traces: &[RunTrace], oracle: f64) -> Result<String> {
    if traces.is_empty() || traces.iter().all(|t| t.rows.is_empty()) {
        return Err(Error::EmptyTrace);
    }
    let curves = band_curves(traces);
    let x_max = traces
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.total_cost))
        .fold(0.0_f64, f64::max);
    let (mut lo, mut hi) = (oracle, oracle);
    for c in &curves {
        for &(_, q1, _, q3) in &c.knots {
            lo = lo.min(q1);
            hi = hi.max(q3);
        }
    }
    let pad = if hi > lo { 0.08 * (hi - lo) } else { 1.0 };
    let f = Frame {
        x0: 0.0,
        x1: if x_max > 0.0 { x_max } else { 1.0 },
        y0: lo - pad,
        y1: hi + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (pl, pr, pt, pb) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{pl}" y="{pt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        pr - pl,
        pb - pt
    );
    for i in 0..=5 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 5.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 5.0;
        let (x, y) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{pb}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            pb + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{xv:.0}</text>"#,
            pb + 20.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{pl}" y2="{y:.2}" stroke="black"/>"#,
            pl - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#,
            pl - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">cumulative cost (observation and intervention steps)</text>"#,
        (pl + pr) / 2.0,
        HEIGHT - 25.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">running optimum</text>"#,
        (pt + pb) / 2.0
    );

    for c in &curves {
        if c.knots.is_empty() {
            continue;
        }
        let col = color(c.algorithm);
        if c.knots.len() == 1 {
            let (x, _, m, _) = c.knots[0];
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{col}"/>"#,
                f.px(x),
                f.py(m)
            );
            continue;
        }
        let upper: Vec<(f64, f64)> = c.knots.iter().map(|k| (k.0, k.3)).collect();
        let lower: Vec<(f64, f64)> = c.knots.iter().map(|k| (k.0, k.1)).collect();
        let mut band = step_path(&f, &upper);
        let mut back = String::new();
        for w in lower.windows(2).rev() {
            let _ = write!(back, " V{:.2} H{:.2}", f.py(w[0].1), f.px(w[0].0));
        }
        let last = lower.last().expect("at least two knots");
        let _ = write!(band, " L{:.2} {:.2}{back} Z", f.px(last.0), f.py(last.1));
        let _ = writeln!(
            s,
            r#"<path d="{band}" fill="{col}" fill-opacity="0.2" stroke="none"/>"#
        );
        let median: Vec<(f64, f64)> = c.knots.iter().map(|k| (k.0, k.2)).collect();
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{col}" stroke-width="2"/>"#,
            step_path(&f, &median)
        );
    }

    let oy = f.py(oracle);
    let _ = writeln!(
        s,
        r#"<line x1="{pl}" y1="{oy:.2}" x2="{pr}" y2="{oy:.2}" stroke="{ORACLE_COLOR}" stroke-dasharray="6 4" stroke-width="1.5"/>"#
    );
    let mut ly = pt + 10.0;
    let lx = pr + 15.0;
    for (label, col) in curves
        .iter()
        .map(|c| (c.algorithm.as_str(), color(c.algorithm)))
        .chain([("oracle", ORACLE_COLOR)])
    {
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{col}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{label}</text>"#,
            lx + 26.0,
            ly + 4.0
        );
        ly += 18.0;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(traces: &[RunTrace], oracle: f64, path: &Path) -> Result<()> {
    atomic_write(path, render_svg(traces, oracle)?.as_bytes())
}

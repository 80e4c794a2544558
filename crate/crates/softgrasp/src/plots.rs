//! SVG rendering of recorded data: per-trial μ traces with the settling
//! band, and the per-category peak-current summary. CSV stays the
//! authoritative artifact; these are generated views of it.

use std::fmt::Write as _;

use softgrasp_core::ControllerConfig;
use thiserror::Error;

use crate::experiment::CategoryPmc;
use crate::record::RunRecord;

const W: f64 = 640.0;
const H: f64 = 320.0;
const MARGIN: f64 = 42.0;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no results to plot")]
    Empty,
}

pub fn check_not_empty(results: usize) -> Result<(), PlotError> {
    if results == 0 {
        Err(PlotError::Empty)
    } else {
        Ok(())
    }
}

/// μ-vs-time trace with the ±band around the setpoint; when the trial
/// settled, the settle time is annotated from first contact.
pub fn mu_trace_svg(
    record: &RunRecord,
    controller: &ControllerConfig,
    settle_time_s: Option<f64>,
) -> String {
    let t_max = record.ticks.last().map(|t| t.t_s).unwrap_or(1.0).max(1e-3);
    let x = |t: f64| MARGIN + (t / t_max) * (W - 2.0 * MARGIN);
    let y = |mu: f64| H - MARGIN - mu.clamp(0.0, 1.0) * (H - 2.0 * MARGIN);
    let (lo, hi) = controller.band();

    let mut svg = svg_open();
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#f4f1ea" stroke="#888"/>"##,
        MARGIN,
        MARGIN,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    // Settling band.
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#cfe8cf" opacity="0.8"/>"##,
        MARGIN,
        y(hi),
        W - 2.0 * MARGIN,
        (y(lo) - y(hi)).abs()
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#4a7" stroke-dasharray="4 3"/>"##,
        MARGIN,
        y(controller.setpoint),
        W - MARGIN,
        y(controller.setpoint)
    );
    // μ polyline; thin the trace to at most ~1200 points.
    let stride = (record.ticks.len() / 1200).max(1);
    let mut points = String::new();
    for tick in record.ticks.iter().step_by(stride) {
        let _ = write!(points, "{:.1},{:.1} ", x(tick.t_s), y(tick.mu));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#205080" stroke-width="1.4"/>"##,
        points.trim_end()
    );
    // Contact and settle annotations.
    if let Some(tc) = record.first_contact_s() {
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#b06020" stroke-dasharray="2 2"/>"##,
            x(tc),
            MARGIN,
            x(tc),
            H - MARGIN
        );
        if let Some(settle) = settle_time_s {
            let _ = writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#206040"/>"##,
                x(tc + settle),
                MARGIN,
                x(tc + settle),
                H - MARGIN
            );
            let _ = writeln!(
                svg,
                r##"<text x="{:.1}" y="{:.1}" font-size="11" fill="#206040">settled +{settle:.2}s</text>"##,
                x(tc + settle) + 4.0,
                MARGIN + 12.0
            );
        }
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" font-size="11" fill="#333">t [s] (0..{t_max:.2})</text>"##,
        W / 2.0 - 30.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="12" y="{:.1}" font-size="11" fill="#333" transform="rotate(-90 12 {:.1})">mean deformation</text>"##,
        H / 2.0,
        H / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Per-category mean peak motor current with min/max whiskers and the
/// gentle-grasp bound.
pub fn category_pmc_svg(summary: &[CategoryPmc], gentle_ma: f64) -> String {
    let max_ma = summary
        .iter()
        .map(|c| c.max_ma)
        .fold(gentle_ma, f64::max)
        * 1.1;
    let x_step = (W - 2.0 * MARGIN) / summary.len().max(1) as f64;
    let y = |ma: f64| H - MARGIN - (ma / max_ma) * (H - 2.0 * MARGIN);

    let mut svg = svg_open();
    let _ = writeln!(
        svg,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#b03030" stroke-dasharray="5 3"/>"##,
        MARGIN,
        y(gentle_ma),
        W - MARGIN,
        y(gentle_ma)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" font-size="11" fill="#b03030">{gentle_ma:.0} mA</text>"##,
        W - MARGIN - 50.0,
        y(gentle_ma) - 4.0
    );
    for (i, c) in summary.iter().enumerate() {
        let cx = MARGIN + (i as f64 + 0.5) * x_step;
        let bar_w = x_step * 0.4;
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#6a8cb4"/>"##,
            cx - bar_w / 2.0,
            y(c.mean_ma),
            bar_w,
            (H - MARGIN) - y(c.mean_ma)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#203040"/>"##,
            cx,
            y(c.min_ma),
            cx,
            y(c.max_ma)
        );
        for ma in [c.min_ma, c.max_ma] {
            let _ = writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#203040"/>"##,
                cx - 6.0,
                y(ma),
                cx + 6.0,
                y(ma)
            );
        }
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-size="11" fill="#333" text-anchor="middle">{}</text>"##,
            cx,
            H - MARGIN + 16.0,
            c.category
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="12" y="{:.1}" font-size="11" fill="#333" transform="rotate(-90 12 {:.1})">peak motor current [mA]</text>"##,
        H / 2.0,
        H / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn svg_open() -> String {
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{H:.0}" viewBox="0 0 {W:.0} {H:.0}">
"##
    )
}

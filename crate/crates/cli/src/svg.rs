//! Hand-emitted convergence plot: lambda_n on a linear left axis and the
//! inner residual on a log10 right axis, both against the outer step.
//! Coordinates are printed with fixed precision so the output is
//! byte-stable for a given trace.

use std::fmt::Write;

use invpower_core::engine::Trace;

const W: f64 = 640.0;
const H: f64 = 400.0;
const ML: f64 = 60.0;
const MR: f64 = 70.0;
const MT: f64 = 20.0;
const MB: f64 = 40.0;

const RES_FLOOR: f64 = 1e-16;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn of(values: impl Iterator<Item = f64>) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo <= 0.0 {
            // flat series: open a symmetric window so the line sits mid-plot
            let pad = lo.abs().max(1.0) * 0.05;
            return Axis {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        Axis { lo, hi }
    }

    /// Maps a value to a y pixel, larger values higher on the canvas.
    fn y(&self, v: f64) -> f64 {
        let t = (v - self.lo) / (self.hi - self.lo);
        H - MB - t.clamp(0.0, 1.0) * (H - MT - MB)
    }
}

fn x_of(i: usize, len: usize) -> f64 {
    if len <= 1 {
        return (ML + W - MR) / 2.0;
    }
    ML + (W - ML - MR) * i as f64 / (len - 1) as f64
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str, dash: &str) {
    let _ = write!(out, r#"<polyline fill="none" stroke="{color}"{dash} stroke-width="1.4" points=""#);
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

fn tick_label(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn render(trace: &Trace) -> String {
    let len = trace.states.len();
    let lambda_axis = Axis::of(trace.states.iter().map(|s| s.lambda));
    let res_axis = Axis::of(
        trace
            .states
            .iter()
            .map(|s| s.inner_residual.max(RES_FLOOR).log10()),
    );

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);

    // frame: left / bottom / right axes
    let _ = writeln!(
        s,
        r##"<path d="M {ML:.2} {MT:.2} V {b:.2} H {r:.2} V {MT:.2}" fill="none" stroke="#000000"/>"##,
        b = H - MB,
        r = W - MR
    );

    let _ = writeln!(
        s,
        r##"<g font-family="monospace" font-size="10" fill="#000000">"##
    );
    // axis titles and legend
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">outer step n</text>"#,
        (ML + W - MR) / 2.0,
        H - 8.0
    );
    let _ = writeln!(
        s,
        r##"<text x="{ML:.2}" y="12" fill="#1f77b4">lambda_n</text>"##
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="12" text-anchor="end" fill="#d62728">inner residual (log)</text>"##,
        W - MR
    );

    // ticks: five on each y axis, up to eight on x
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let y = H - MB - t * (H - MT - MB);
        let lv = lambda_axis.lo + t * (lambda_axis.hi - lambda_axis.lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ML - 4.0,
            y + 3.0,
            tick_label(lv)
        );
        let rv = res_axis.lo + t * (res_axis.hi - res_axis.lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">1e{:.1}</text>"#,
            W - MR + 4.0,
            y + 3.0,
            rv
        );
    }
    let x_ticks = len.clamp(2, 8);
    for k in 0..x_ticks {
        let i = k * (len.saturating_sub(1)).max(1) / (x_ticks - 1).max(1);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_of(i.min(len.saturating_sub(1)), len),
            H - MB + 14.0,
            i.min(len.saturating_sub(1))
        );
    }
    s.push_str("</g>\n");

    let lambda_pts: Vec<(f64, f64)> = trace
        .states
        .iter()
        .enumerate()
        .map(|(i, st)| (x_of(i, len), lambda_axis.y(st.lambda)))
        .collect();
    let res_pts: Vec<(f64, f64)> = trace
        .states
        .iter()
        .enumerate()
        .map(|(i, st)| {
            (
                x_of(i, len),
                res_axis.y(st.inner_residual.max(RES_FLOOR).log10()),
            )
        })
        .collect();
    polyline(&mut s, &lambda_pts, "#1f77b4", "");
    polyline(&mut s, &res_pts, "#d62728", r#" stroke-dasharray="4 3""#);

    s.push_str("</svg>\n");
    s
}

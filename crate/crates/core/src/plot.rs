//! Minimal standalone SVG line charts for experiment summaries.
//!
//! No interactive viewer, no timestamps: the output is a deterministic
//! function of the data, suitable for byte-level reproducibility checks.

/// One plotted point with a symmetric error bar.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBarPoint {
    pub x: f64,
    pub y: f64,
    pub halfwidth: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// Renders a single series as an SVG line chart with error bars.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[ErrorBarPoint],
) -> String {
    let (x_min, x_max) = axis_range(points.iter().map(|p| p.x), 0.0);
    let (y_min, y_max) = axis_range(
        points
            .iter()
            .flat_map(|p| [p.y - p.halfwidth, p.y + p.halfwidth]),
        0.05,
    );

    let x_span = (x_max - x_min).max(f64::MIN_POSITIVE);
    let y_span = (y_max - y_min).max(f64::MIN_POSITIVE);
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let sy = |y: f64| HEIGHT - MARGIN_BOTTOM - (y - y_min) / y_span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{l:.1}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        b = HEIGHT - MARGIN_BOTTOM
    ));
    svg.push_str(&format!(
        "  <line x1=\"{l:.1}\" y1=\"{t:.1}\" x2=\"{l:.1}\" y2=\"{b:.1}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM
    ));
    for step in 0..=4 {
        let frac = step as f64 / 4.0;
        let xv = x_min + frac * x_span;
        let yv = y_min + frac * y_span;
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            sx(xv),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            sy(yv) + 4.0,
            fmt_tick(yv)
        ));
        svg.push_str(&format!(
            "  <line x1=\"{l:.1}\" y1=\"{y:.1}\" x2=\"{r:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            l = MARGIN_LEFT,
            r = WIDTH - MARGIN_RIGHT,
            y = sy(yv)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        escape(y_label)
    ));

    // Error bars under the line.
    for p in points {
        if p.halfwidth > 0.0 {
            let x = sx(p.x);
            svg.push_str(&format!(
                "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#888888\"/>\n",
                sy(p.y - p.halfwidth),
                sy(p.y + p.halfwidth)
            ));
        }
    }
    let path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
        .collect();
    svg.push_str(&format!(
        "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n",
        path.join(" ")
    ));
    for p in points {
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
            sx(p.x),
            sy(p.y)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn axis_range(values: impl Iterator<Item = f64>, pad_fraction: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        return (min - 0.5, max + 0.5);
    }
    let pad = (max - min) * pad_fraction;
    (min - pad, max + pad)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

//! Minimal SVG line plots: axes, risk-vs-signal polylines, a text legend.
//! The CSV is the artifact of record; these are a reading convenience with
//! no plotting dependency.

use sparsetest::numfmt::sig10;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 18.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;

fn color_for(series: &str) -> &'static str {
    match series {
        "anova" => "#d62728",
        "max" => "#2ca02c",
        "hc_disc" => "#1f77b4",
        "hc_cont" => "#17becf",
        _ => "#9467bd",
    }
}

/// Render one panel: best risk (y, fixed [0, 1.05] range) against the
/// signal level (x), one polyline per named series.
pub fn risk_plot_svg(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .collect();
    let (mut x_min, mut x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !x_min.is_finite() || !x_max.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_min == x_max {
        x_min -= 0.5;
        x_max += 0.5;
    }
    let y_min = 0.0;
    let y_max = 1.05;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        LEFT + plot_w / 2.0,
        title
    ));

    // Horizontal gridlines and y labels at quarter-risk steps.
    for i in 0..=4 {
        let y = i as f64 * 0.25;
        let py = sy(y);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" \
             stroke=\"#dddddd\"/>\n",
            LEFT,
            LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            LEFT - 8.0,
            py + 4.0,
            sig10(y)
        ));
    }
    // X ticks at quarter points.
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = sx(x);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#999999\"/>\n",
            TOP + plot_h,
            TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            TOP + plot_h + 20.0,
            sig10(x)
        ));
    }
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{LEFT:.2}\" y1=\"{TOP:.2}\" x2=\"{LEFT:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">best risk</text>\n",
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    ));

    // Polylines with point markers.
    for (name, pts) in series {
        let color = color_for(name);
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }

    // Legend, top right.
    for (i, (name, _)) in series.iter().enumerate() {
        let y = TOP + 8.0 + i as f64 * 16.0;
        let x = LEFT + plot_w - 110.0;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            y - 9.0,
            color_for(name)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\">{name}</text>\n",
            x + 16.0
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

//! Minimal self-contained SVG plots: a scree plot and a loading heatmap.

use std::fmt::Write;

use nalgebra::DMatrix;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Observed eigenvalues as markers joined by a line, with the parallel
/// analysis threshold as a dashed line.
pub fn scree(observed: &[f64], threshold: &[f64]) -> Result<String, String> {
    if observed.is_empty() || observed.len() != threshold.len() {
        return Err("scree plot needs matching, non-empty eigenvalue series".into());
    }
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (56.0, 16.0, 24.0, 44.0);
    let n = observed.len();
    let ymax = observed
        .iter()
        .chain(threshold)
        .copied()
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max)
        .ceil();
    let x = |i: usize| {
        let span = (n.max(2) - 1) as f64;
        left + (w - left - right) * i as f64 / span
    };
    let y = |v: f64| top + (h - top - bottom) * (1.0 - v.clamp(0.0, ymax) / ymax);

    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();
    // Axes with a tick at every integer eigenvalue.
    writeln!(
        s,
        "<path d=\"M{l} {t}V{b}H{r}\" stroke=\"black\" fill=\"none\"/>",
        l = left,
        t = top,
        b = h - bottom,
        r = w - right
    )
    .unwrap();
    let step = (ymax / 8.0).ceil().max(1.0);
    let mut tick = 0.0;
    while tick <= ymax {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{tick}</text>",
            px(left - 6.0),
            px(y(tick) + 4.0)
        )
        .unwrap();
        tick += step;
    }
    writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>Factor number</text>",
        px((left + w - right) / 2.0),
        px(h - 8.0)
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\" {FONT}>Eigenvalue</text>",
        px(h / 2.0),
        px(h / 2.0)
    )
    .unwrap();

    let line = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .map(|(i, v)| format!("{},{}", px(x(i)), px(y(*v))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(
        s,
        "<polyline class=\"threshold\" points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"5 3\"/>",
        line(threshold)
    )
    .unwrap();
    writeln!(
        s,
        "<polyline class=\"observed\" points=\"{}\" fill=\"none\" stroke=\"#1f77b4\"/>",
        line(observed)
    )
    .unwrap();
    for (i, v) in observed.iter().enumerate() {
        writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#1f77b4\"/>",
            px(x(i)),
            px(y(*v))
        )
        .unwrap();
    }
    let lx = w - right - 150.0;
    writeln!(
        s,
        "<path d=\"M{} {}h20\" stroke=\"#1f77b4\"/><text x=\"{}\" y=\"{}\" {FONT}>Observed</text>",
        px(lx),
        px(top + 6.0),
        px(lx + 26.0),
        px(top + 10.0)
    )
    .unwrap();
    writeln!(
        s,
        "<path d=\"M{} {}h20\" stroke=\"#d62728\" stroke-dasharray=\"5 3\"/><text x=\"{}\" y=\"{}\" {FONT}>Parallel analysis</text>",
        px(lx),
        px(top + 22.0),
        px(lx + 26.0),
        px(top + 26.0)
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

// Diverging blue-white-red scale over [-1, 1].
fn colour(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 - (255.0 - c) * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (fade(178.0), fade(24.0), fade(43.0))
    } else {
        (fade(33.0), fade(102.0), fade(172.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Pattern coefficients as a p × k grid of coloured cells with values.
pub fn loading_heatmap(pattern: &DMatrix<f64>, items: &[String]) -> Result<String, String> {
    let (p, k) = pattern.shape();
    if k == 0 || p == 0 {
        return Err("loading heatmap needs at least one factor and one item".into());
    }
    if items.len() != p {
        return Err(format!("{} item labels for {p} rows", items.len()));
    }
    let (cell_w, cell_h) = (56.0, 16.0);
    let label_w = 9.0 + 7.0 * items.iter().map(|s| s.chars().count()).max().unwrap_or(0) as f64;
    let (top, pad) = (28.0, 8.0);
    let w = label_w + cell_w * k as f64 + pad;
    let h = top + cell_h * p as f64 + pad;

    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        px(w),
        px(h),
        px(w),
        px(h)
    )
    .unwrap();
    writeln!(s, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>", px(w), px(h)).unwrap();
    for j in 0..k {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>F{}</text>",
            px(label_w + cell_w * (j as f64 + 0.5)),
            px(top - 10.0),
            j + 1
        )
        .unwrap();
    }
    for (i, item) in items.iter().enumerate() {
        let y = top + cell_h * i as f64;
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>",
            px(label_w - 6.0),
            px(y + 12.0),
            escape(item)
        )
        .unwrap();
        for j in 0..k {
            let v = pattern[(i, j)];
            let x = label_w + cell_w * j as f64;
            let ink = if v.abs() > 0.6 { "white" } else { "black" };
            writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\" {FONT}>{:.2}</text>",
                px(x),
                px(y),
                colour(v),
                px(x + cell_w / 2.0),
                px(y + 12.0),
                v
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

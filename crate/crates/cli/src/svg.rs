//! Static SVG charts written as plain strings.

use std::fmt::Write;

use rentsim::engine::Histogram;

use crate::format::fmt_sig;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 90.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Viridis control points.
const COLORMAP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

fn label(v: f64) -> String {
    fmt_sig(v, 4)
}

/// Finite extent of `values`, widened when it collapses to a point.
fn extent<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = (lo.abs() * 0.1).max(1e-3);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new((lo, hi): (f64, f64), from: f64, to: f64) -> Self {
        Scale { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + step * 1e-9 && out.len() < 20 {
            // Snap values like 0.30000000000000004.
            out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn plot_x() -> (f64, f64) {
    (LEFT, WIDTH - RIGHT)
}

fn plot_y() -> (f64, f64) {
    (HEIGHT - BOTTOM, TOP)
}

fn color_at(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pos = t * (COLORMAP.len() - 1) as f64;
    let k = (pos.floor() as usize).min(COLORMAP.len() - 2);
    let f = pos - k as f64;
    let (a, b) = (COLORMAP[k], COLORMAP[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

struct Doc {
    buf: String,
}

impl Doc {
    fn new(title: &str) -> Self {
        let mut buf = String::new();
        let _ = write!(
            buf,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
             <title>{}</title>\n\
             <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n",
            escape(title)
        );
        let mut doc = Doc { buf };
        doc.text(WIDTH / 2.0, 28.0, "middle", 16.0, title, "");
        doc
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, content: &str, extra: &str) {
        let _ = writeln!(
            self.buf,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-size=\"{size}\"{extra}>{}</text>",
            escape(content)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.buf,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\"/>"
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: &str) {
        let _ = writeln!(
            self.buf,
            "<rect class=\"{class}\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
            w.max(0.0),
            h.max(0.0)
        );
    }

    /// Polyline through the finite points; gaps split the path.
    fn series_path(&mut self, points: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64) {
        let mut d = String::new();
        let mut pen_down = false;
        for (x, y) in points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{x:.2} {y:.2} ", if pen_down { 'L' } else { 'M' });
            pen_down = true;
        }
        let _ = writeln!(
            self.buf,
            "<path class=\"series\" d=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>",
            d.trim_end()
        );
    }

    fn frame(&mut self) {
        let (x0, x1) = plot_x();
        let (y0, y1) = plot_y();
        let _ = writeln!(
            self.buf,
            "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
            x1 - x0,
            y0 - y1
        );
    }

    fn x_axis(&mut self, sx: &Scale, name: &str) {
        let (y0, _) = plot_y();
        for t in sx.ticks() {
            let x = sx.map(t);
            self.line(x, y0, x, y0 + 5.0, "#444");
            self.text(x, y0 + 18.0, "middle", 11.0, &label(t), "");
        }
        self.text(
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 15.0,
            "middle",
            13.0,
            name,
            "",
        );
    }

    fn y_axis(&mut self, sy: &Scale, name: &str, right: bool, color: &str) {
        let (x0, x1) = plot_x();
        let (base, dir, anchor) = if right {
            (x1, 1.0, "start")
        } else {
            (x0, -1.0, "end")
        };
        for t in sy.ticks() {
            let y = sy.map(t);
            self.line(base, y, base + 5.0 * dir, y, "#444");
            self.text(base + 8.0 * dir, y + 4.0, anchor, 11.0, &label(t), "");
        }
        let lx = if right { WIDTH - 20.0 } else { 20.0 };
        let ly = (TOP + HEIGHT - BOTTOM) / 2.0;
        let rotate = format!(" transform=\"rotate(-90 {lx:.2} {ly:.2})\" fill=\"{color}\"");
        self.text(lx, ly, "middle", 13.0, name, &rotate);
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        let x = LEFT + 10.0;
        for (k, (name, color)) in entries.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            self.line(x, y - 4.0, x + 18.0, y - 4.0, color);
            self.text(x + 24.0, y, "start", 11.0, name, "");
        }
    }

    /// Vertical colour bar for values in `[lo, hi]`.
    fn color_bar(&mut self, lo: f64, hi: f64, name: &str) {
        let x = WIDTH - RIGHT + 20.0;
        let (y0, y1) = plot_y();
        let steps = 32;
        let h = (y0 - y1) / steps as f64;
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64;
            self.rect(
                x,
                y0 - h * (k + 1) as f64,
                14.0,
                h + 0.5,
                &color_at(t),
                "colorbar",
            );
        }
        self.text(x + 18.0, y0, "start", 10.0, &label(lo), "");
        self.text(x + 18.0, y1 + 8.0, "start", 10.0, &label(hi), "");
        self.text(x + 7.0, y1 - 8.0, "middle", 11.0, name, "");
    }

    fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}

/// Several series over a shared x grid and a single y axis.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    series: &[(&str, &[f64])],
) -> String {
    let mut doc = Doc::new(title);
    let (x0, x1) = plot_x();
    let (y0, y1) = plot_y();
    let sx = Scale::new(extent(xs), x0, x1);
    let sy = Scale::new(extent(series.iter().flat_map(|(_, ys)| ys.iter())), y0, y1);
    doc.frame();
    doc.x_axis(&sx, x_label);
    doc.y_axis(&sy, y_label, false, "#000");
    let mut legend = Vec::new();
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        doc.series_path(
            xs.iter()
                .zip(ys.iter())
                .map(|(&x, &y)| (sx.map(x), sy.map(y))),
            color,
            2.0,
        );
        legend.push((*name, color));
    }
    doc.legend(&legend);
    doc.finish()
}

/// Two series with independent left and right y axes.
pub fn dual_axis_chart(
    title: &str,
    x_label: &str,
    xs: &[f64],
    left: (&str, &[f64]),
    right: (&str, &[f64]),
) -> String {
    let mut doc = Doc::new(title);
    let (x0, x1) = plot_x();
    let (y0, y1) = plot_y();
    let sx = Scale::new(extent(xs), x0, x1);
    let sl = Scale::new(extent(left.1), y0, y1);
    let sr = Scale::new(extent(right.1), y0, y1);
    doc.frame();
    doc.x_axis(&sx, x_label);
    doc.y_axis(&sl, left.0, false, PALETTE[0]);
    doc.y_axis(&sr, right.0, true, PALETTE[1]);
    doc.series_path(
        xs.iter().zip(left.1).map(|(&x, &y)| (sx.map(x), sl.map(y))),
        PALETTE[0],
        2.0,
    );
    doc.series_path(
        xs.iter()
            .zip(right.1)
            .map(|(&x, &y)| (sx.map(x), sr.map(y))),
        PALETTE[1],
        2.0,
    );
    doc.legend(&[(left.0, PALETTE[0]), (right.0, PALETTE[1])]);
    doc.finish()
}

/// Trajectory in the `(x, y)` plane with points coloured by `color_by`.
pub fn phase_scatter(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    color_by: &[f64],
    color_label: &str,
) -> String {
    let mut doc = Doc::new(title);
    let (x0, x1) = plot_x();
    let (y0, y1) = plot_y();
    let sx = Scale::new(extent(xs), x0, x1);
    let sy = Scale::new(extent(ys), y0, y1);
    let (clo, chi) = extent(color_by);
    doc.frame();
    doc.x_axis(&sx, x_label);
    doc.y_axis(&sy, y_label, false, "#000");
    doc.series_path(
        xs.iter().zip(ys).map(|(&x, &y)| (sx.map(x), sy.map(y))),
        "#bbbbbb",
        1.0,
    );
    for ((&x, &y), &c) in xs.iter().zip(ys).zip(color_by) {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let _ = writeln!(
            doc.buf,
            "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{}\"/>",
            sx.map(x),
            sy.map(y),
            color_at((c - clo) / (chi - clo))
        );
    }
    doc.color_bar(clo, chi, color_label);
    doc.finish()
}

pub fn histogram_chart(title: &str, x_label: &str, hist: &Histogram) -> String {
    let mut doc = Doc::new(title);
    let (x0, x1) = plot_x();
    let (y0, y1) = plot_y();
    let sx = Scale::new((hist.lo, hist.hi), x0, x1);
    let top = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let sy = Scale::new((0.0, top), y0, y1);
    doc.frame();
    doc.x_axis(&sx, x_label);
    doc.y_axis(&sy, "agents", false, "#000");
    for (k, &count) in hist.counts.iter().enumerate() {
        let (a, b) = hist.bin_edges(k);
        let (xa, xb) = (sx.map(a), sx.map(b));
        let y = sy.map(count as f64);
        doc.rect(xa + 1.0, y, xb - xa - 2.0, y0 - y, PALETTE[0], "bar");
    }
    doc.finish()
}

/// `values[i][j]` is drawn at row `rows[i]` (bottom to top), column `cols[j]`.
pub fn heatmap_chart(
    title: &str,
    row_label: &str,
    col_label: &str,
    rows: &[f64],
    cols: &[f64],
    values: &[Vec<f64>],
) -> String {
    let mut doc = Doc::new(title);
    let (x0, x1) = plot_x();
    let (y0, y1) = plot_y();
    let (lo, hi) = extent(values.iter().flatten());
    let cw = (x1 - x0) / cols.len().max(1) as f64;
    let ch = (y0 - y1) / rows.len().max(1) as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = x0 + cw * j as f64;
            let y = y0 - ch * (i + 1) as f64;
            doc.rect(x, y, cw, ch, &color_at((v - lo) / (hi - lo)), "cell");
            let fill = if (v - lo) / (hi - lo) > 0.6 {
                "#000"
            } else {
                "#fff"
            };
            doc.text(
                x + cw / 2.0,
                y + ch / 2.0 + 4.0,
                "middle",
                11.0,
                &label(v),
                &format!(" fill=\"{fill}\""),
            );
        }
    }
    for (j, c) in cols.iter().enumerate() {
        doc.text(
            x0 + cw * (j as f64 + 0.5),
            y0 + 18.0,
            "middle",
            11.0,
            &label(*c),
            "",
        );
    }
    for (i, r) in rows.iter().enumerate() {
        doc.text(
            x0 - 8.0,
            y0 - ch * (i as f64 + 0.5) + 4.0,
            "end",
            11.0,
            &label(*r),
            "",
        );
    }
    doc.text(
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0,
        "middle",
        13.0,
        col_label,
        "",
    );
    let ly = (TOP + HEIGHT - BOTTOM) / 2.0;
    doc.text(
        20.0,
        ly,
        "middle",
        13.0,
        row_label,
        &format!(" transform=\"rotate(-90 20 {ly:.2})\""),
    );
    doc.color_bar(lo, hi, "");
    doc.finish()
}

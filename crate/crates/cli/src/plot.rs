//! Minimal static SVG line plots.

use std::fmt::Write;

use etsafe::sim::EventLog;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
/// Series longer than this are reduced to per-bucket extremes.
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A labelled simulation result to draw.
pub struct Run<'a> {
    pub label: &'a str,
    pub log: &'a EventLog,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

pub fn certificate_vs_time(runs: &[Run<'_>]) -> String {
    let mut series: Vec<Series> = runs
        .iter()
        .map(|r| Series {
            label: r.label.to_string(),
            points: r.log.samples.iter().map(|s| (s.t, s.h)).collect(),
            dashed: false,
        })
        .collect();
    let t_end = runs.iter().map(|r| r.log.t_end).fold(0.0, f64::max);
    series.push(Series {
        label: "zero".into(),
        points: vec![(0.0, 0.0), (t_end, 0.0)],
        dashed: true,
    });
    render(&Figure {
        title: "Certificate value along the trajectory".into(),
        x_label: "t".into(),
        y_label: "h(x(t))".into(),
        log_y: false,
        series,
    })
}

pub fn interevent_times(runs: &[Run<'_>]) -> String {
    let series = runs
        .iter()
        .map(|r| Series {
            label: r.label.to_string(),
            points: r
                .log
                .interevent_times
                .iter()
                .enumerate()
                .map(|(i, &dt)| ((i + 1) as f64, dt))
                .collect(),
            dashed: false,
        })
        .collect();
    render(&Figure {
        title: "Interevent times".into(),
        x_label: "event index".into(),
        y_label: "t_{i+1} - t_i".into(),
        log_y: true,
        series,
    })
}

/// `x_1` against `x_2` for planar systems, `x` against `t` otherwise.
pub fn phase_portrait(runs: &[Run<'_>]) -> String {
    let planar = runs
        .iter()
        .all(|r| r.log.samples.first().is_some_and(|s| s.x.len() == 2));
    let mut series: Vec<Series> = runs
        .iter()
        .map(|r| Series {
            label: r.label.to_string(),
            points: r
                .log
                .samples
                .iter()
                .map(|s| {
                    if planar {
                        (s.x[0], s.x[1])
                    } else {
                        (s.t, s.x[0])
                    }
                })
                .collect(),
            dashed: false,
        })
        .collect();
    if planar {
        series.push(Series {
            label: "unit circle".into(),
            points: (0..=180)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 180.0;
                    (a.cos(), a.sin())
                })
                .collect(),
            dashed: true,
        });
    }
    let (x_label, y_label) = if planar { ("x1", "x2") } else { ("t", "x") };
    render(&Figure {
        title: "Phase portrait".into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_y: false,
        series,
    })
}

pub fn render(fig: &Figure) -> String {
    let map_y = |y: f64| if fig.log_y { y.log10() } else { y };
    let usable = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!fig.log_y || y > 0.0);

    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for s in &fig.series {
        for &(x, y) in s.points.iter().filter(|p| usable(p)) {
            let y = map_y(y);
            bounds = Some(match bounds {
                None => (x, x, y, y),
                Some((a, b, c, d)) => (a.min(x), b.max(x), c.min(y), d.max(y)),
            });
        }
    }
    let (x0, x1, y0, y1) = widen(bounds.unwrap_or((0.0, 1.0, 0.0, 1.0)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (map_y(y) - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (LEFT + f * pw, TOP + (1.0 - f) * ph);
        let ylab = if fig.log_y {
            format!("1e{yv:.1}")
        } else {
            tick(yv)
        };
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            ylab
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );

    let mut color = 0;
    for (k, s) in fig.series.iter().enumerate() {
        let stroke = if s.dashed {
            "#888"
        } else {
            let c = PALETTE[color % PALETTE.len()];
            color += 1;
            c
        };
        let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| usable(p)).collect();
        let pts = decimate(&pts, MAX_POINTS);
        let mut coords = String::new();
        for (x, y) in pts {
            let _ = write!(coords, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="5,4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.2"{dash} points="{}"/>"#,
            coords.trim_end()
        );
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let lx = LEFT + pw - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="2"{dash}/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn widen((x0, x1, y0, y1): (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    let pad = |lo: f64, hi: f64| {
        if hi > lo {
            let m = 0.03 * (hi - lo);
            (lo - m, hi + m)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (a, b) = pad(x0, x1);
    let (c, d) = pad(y0, y1);
    (a, b, c, d)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Keeps the lowest and highest point of each bucket so spikes survive.
fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points.to_vec();
    }
    let buckets = max / 2;
    let size = points.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(max + 1);
    for chunk in points.chunks(size) {
        let lo = chunk
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .unwrap();
        let hi = chunk
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .unwrap();
        let (first, second) = if lo.0 <= hi.0 { (lo, hi) } else { (hi, lo) };
        out.push(*first.1);
        if second.0 != first.0 {
            out.push(*second.1);
        }
    }
    out
}

//! SVG figures rendered from result rows.
//!
//! Every figure is a pure function of the CSV: plotting reads the rows back
//! from disk, so regenerating from a saved CSV gives identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::table::{read_csv, ResultRow};
use crate::coverage::Quantity;
use crate::error::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

const CONTOUR_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

/// Reads `csv` and writes every figure its rows support into `out_dir`.
pub fn render_from_csv(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_csv(csv)?;
    let mut written = Vec::new();
    for (name, svg) in render(&rows) {
        let path = out_dir.join(name);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

/// All figures as `(file name, SVG text)`.
pub fn render(rows: &[ResultRow]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    out.extend(association_heatmaps(rows));
    out.extend(cp_vs_beta(rows));
    out.extend(cp_vs_time(rows));
    out
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Groups preserving first appearance.
fn group_by<'a, K: PartialEq>(
    rows: impl Iterator<Item = &'a ResultRow>,
    key: impl Fn(&ResultRow) -> K,
) -> Vec<(K, Vec<&'a ResultRow>)> {
    let mut groups: Vec<(K, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
}

fn suffix(i: usize, n: usize) -> String {
    if n == 1 {
        String::new()
    } else {
        format!("_{i}")
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..1e5).contains(&a) {
        let e = a.log10().floor();
        let m = x / 10f64.powf(e);
        if (m - m.round()).abs() < 1e-9 {
            format!("{}e{}", m.round(), e)
        } else {
            format!("{m:.1}e{e}")
        }
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: &[f64], log: bool) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Axis {
            lo,
            hi,
            log: log && lo > 0.0,
        }
    }

    fn unit(&self, x: f64) -> f64 {
        if self.log {
            (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (x - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let a = self.lo.log10().ceil() as i32;
            let b = self.hi.log10().floor() as i32;
            return (a..=b).map(|e| 10f64.powi(e)).collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 2.5, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 6.0)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step + 1e-9).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + self.x.unit(x) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - self.y.unit(y) * (HEIGHT - TOP - BOTTOM)
    }
}

struct Svg(String);

impl Svg {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (WIDTH - RIGHT + LEFT) / 2.0,
            escape(title)
        );
        Svg(s)
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, body: &str) {
        let _ = writeln!(
            self.0,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(body)
        );
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), style: &str) {
        let _ = writeln!(
            self.0,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], style: &str) {
        let mut p = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if i > 0 {
                p.push(' ');
            }
            let _ = write!(p, "{x:.2},{y:.2}");
        }
        let _ = writeln!(self.0, r#"<polyline points="{p}" fill="none" {style}/>"#);
    }

    fn axes(&mut self, f: &Frame, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            self.0,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in f.x.ticks() {
            let x = f.px(t);
            self.line((x, y0), (x, y0 + 5.0), r#"stroke="black""#);
            self.text(x, y0 + 18.0, "middle", &fmt_num(t));
        }
        for t in f.y.ticks() {
            let y = f.py(t);
            self.line((x0 - 5.0, y), (x0, y), r#"stroke="black""#);
            self.text(x0 - 8.0, y + 4.0, "end", &fmt_num(t));
        }
        self.text((x0 + x1) / 2.0, HEIGHT - 18.0, "middle", xlabel);
        let _ = writeln!(
            self.0,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn legend(&mut self, entries: &[(String, String)]) {
        let x = WIDTH - RIGHT + 12.0;
        for (i, (label, style)) in entries.iter().enumerate() {
            let y = TOP + 12.0 + 18.0 * i as f64;
            self.line((x, y), (x + 24.0, y), style);
            self.text(x + 30.0, y + 4.0, "start", label);
        }
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn stroke(color: &str, dash: Option<&str>) -> String {
    match dash {
        Some(d) => format!(r#"stroke="{color}" stroke-width="1.5" stroke-dasharray="{d}""#),
        None => format!(r#"stroke="{color}" stroke-width="1.5""#),
    }
}

/// Blue-to-yellow colour ramp on `[0, 1]`.
fn ramp(v: f64) -> String {
    let stops = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let v = v.clamp(0.0, 1.0);
    let i = if v < 0.5 { 0 } else { 1 };
    let (a, ca) = stops[i];
    let (b, cb) = stops[i + 1];
    let f = (v - a) / (b - a);
    let c: Vec<u8> = (0..3)
        .map(|k| (ca[k] + f * (cb[k] - ca[k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Association probability over `(H_R, λ_R)`, one figure per remaining
/// parameter combination, with labelled contours.
fn association_heatmaps(rows: &[ResultRow]) -> Vec<(String, String)> {
    let assoc = rows
        .iter()
        .filter(|r| r.quantity == Quantity::Association && r.value().is_some());
    let groups = group_by(assoc, |r| {
        (r.scheme, r.v.to_bits(), r.t.to_bits(), r.lambda_t.to_bits())
    });
    let groups: Vec<_> = groups
        .into_iter()
        .filter(|(_, g)| {
            distinct(g.iter().map(|r| r.h_r)).len() >= 2
                && distinct(g.iter().map(|r| r.lambda_r)).len() >= 2
        })
        .collect();
    let n = groups.len();
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (_, g))| {
            let xs = distinct(g.iter().map(|r| r.h_r));
            let ys = distinct(g.iter().map(|r| r.lambda_r));
            let log_y = ys[ys.len() - 1] / ys[0] > 10.0;
            let mut grid = vec![vec![f64::NAN; xs.len()]; ys.len()];
            for r in &g {
                let ix = xs.iter().position(|&x| x == r.h_r).unwrap();
                let iy = ys.iter().position(|&y| y == r.lambda_r).unwrap();
                grid[iy][ix] = r.value().unwrap();
            }
            let f = Frame {
                x: Axis::new(&xs, false),
                y: Axis::new(&ys, log_y),
            };
            let r0 = g[0];
            let mut svg = Svg::new(&format!(
                "Relay association probability, t = {} s, v = {} m/s",
                fmt_num(r0.t),
                fmt_num(r0.v)
            ));
            // Cells centred on the grid nodes, split at the midpoints.
            let edges = |v: &[f64], px: &dyn Fn(f64) -> f64| -> Vec<f64> {
                let mut e = vec![px(v[0])];
                for w in v.windows(2) {
                    e.push((px(w[0]) + px(w[1])) / 2.0);
                }
                e.push(px(v[v.len() - 1]));
                e
            };
            let ex = edges(&xs, &|x| f.px(x));
            let ey = edges(&ys, &|y| f.py(y));
            for (iy, row) in grid.iter().enumerate() {
                for (ix, &v) in row.iter().enumerate() {
                    if v.is_nan() {
                        continue;
                    }
                    let (xa, xb) = (ex[ix], ex[ix + 1]);
                    let (ya, yb) = (ey[iy + 1], ey[iy]);
                    let _ = writeln!(
                        svg.0,
                        r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="none" shape-rendering="crispEdges"/>"#,
                        xb - xa,
                        yb - ya,
                        ramp(v)
                    );
                }
            }
            for level in CONTOUR_LEVELS {
                let segments = marching_squares(&grid, level);
                let to_px = |(gx, gy): (f64, f64)| (interp_px(&xs, gx, &|x| f.px(x)), interp_px(&ys, gy, &|y| f.py(y)));
                for (a, b) in &segments {
                    svg.line(to_px(*a), to_px(*b), r#"stroke="white" stroke-width="1.5""#);
                }
                if let Some((a, b)) = segments.get(segments.len() / 2) {
                    let (pa, pb) = (to_px(*a), to_px(*b));
                    svg.text((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0 - 3.0, "middle", &fmt_num(level));
                }
            }
            svg.axes(&f, "H_R [m]", "λ_R [1/m²]");
            // Colour bar.
            let x = WIDTH - RIGHT + 20.0;
            for k in 0..50 {
                let v = k as f64 / 49.0;
                let y = HEIGHT - BOTTOM - (k as f64 + 1.0) * (HEIGHT - TOP - BOTTOM) / 50.0;
                let _ = writeln!(
                    svg.0,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
                    (HEIGHT - TOP - BOTTOM) / 50.0 + 0.5,
                    ramp(v)
                );
            }
            for v in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let y = HEIGHT - BOTTOM - v * (HEIGHT - TOP - BOTTOM);
                svg.text(x + 22.0, y + 4.0, "start", &fmt_num(v));
            }
            (format!("association_heatmap{}.svg", suffix(i, n)), svg.finish())
        })
        .collect()
}

/// Pixel position of a fractional grid index.
fn interp_px(values: &[f64], g: f64, px: &dyn Fn(f64) -> f64) -> f64 {
    let i = (g.floor() as usize).min(values.len() - 1);
    let frac = g - i as f64;
    if i + 1 >= values.len() {
        return px(values[i]);
    }
    px(values[i]) + frac * (px(values[i + 1]) - px(values[i]))
}

/// Iso-line segments of `grid[y][x]` at `level`, in fractional grid
/// coordinates `(x, y)`. Saddle cells are resolved with the cell mean.
pub fn marching_squares(grid: &[Vec<f64>], level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let mut out = Vec::new();
    let ny = grid.len();
    if ny < 2 {
        return out;
    }
    let nx = grid[0].len();
    for y in 0..ny - 1 {
        for x in 0..nx.saturating_sub(1) {
            let c = [
                grid[y][x],
                grid[y][x + 1],
                grid[y + 1][x + 1],
                grid[y + 1][x],
            ];
            if c.iter().any(|v| v.is_nan()) {
                continue;
            }
            let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            // Crossing point on each edge (corner k to k+1).
            let cross = |k: usize| -> Option<(f64, f64)> {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if (a >= level) == (b >= level) {
                    return None;
                }
                let f = (level - a) / (b - a);
                let (pa, pb) = (corners[k], corners[(k + 1) % 4]);
                Some((
                    x as f64 + pa.0 + f * (pb.0 - pa.0),
                    y as f64 + pa.1 + f * (pb.1 - pa.1),
                ))
            };
            let pts: Vec<(usize, (f64, f64))> =
                (0..4).filter_map(|k| cross(k).map(|p| (k, p))).collect();
            match pts.len() {
                2 => out.push((pts[0].1, pts[1].1)),
                4 => {
                    let centre_above = c.iter().sum::<f64>() / 4.0 >= level;
                    let corner0_above = c[0] >= level;
                    // Pair edges so that the centre's side stays connected.
                    if centre_above == corner0_above {
                        out.push((pts[0].1, pts[1].1));
                        out.push((pts[2].1, pts[3].1));
                    } else {
                        out.push((pts[0].1, pts[3].1));
                        out.push((pts[1].1, pts[2].1));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn line_style(i: usize, dash: Option<&str>) -> String {
    stroke(PALETTE[i % PALETTE.len()], dash)
}

/// Total coverage against the threshold, one curve per altitude and time,
/// with the direct-link baseline.
fn cp_vs_beta(rows: &[ResultRow]) -> Vec<(String, String)> {
    let usable = rows
        .iter()
        .filter(|r| r.beta_db.is_some() && r.value().is_some());
    let groups = group_by(usable, |r| {
        (
            r.scheme,
            r.v.to_bits(),
            r.lambda_r.to_bits(),
            r.lambda_t.to_bits(),
        )
    });
    let groups: Vec<_> = groups
        .into_iter()
        .filter(|(_, g)| {
            g.iter().any(|r| r.quantity == Quantity::Total)
                && distinct(g.iter().map(|r| r.beta_db.unwrap())).len() >= 2
        })
        .collect();
    let n = groups.len();
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (_, g))| {
            let betas = distinct(g.iter().map(|r| r.beta_db.unwrap()));
            let f = Frame {
                x: Axis::new(&betas, false),
                y: Axis {
                    lo: 0.0,
                    hi: 1.0,
                    log: false,
                },
            };
            let r0 = g[0];
            let mut svg = Svg::new(&format!(
                "Coverage probability, λ_R = {} /m²",
                fmt_num(r0.lambda_r)
            ));
            let heights = distinct(g.iter().map(|r| r.h_r));
            let times = distinct(g.iter().map(|r| r.t_over_tbar.unwrap_or(r.t)));
            let dashes = [None, Some("2,3"), Some("8,3,2,3"), Some("1,2")];
            let mut legend = Vec::new();
            for (hi, &h) in heights.iter().enumerate() {
                for (ti, &t) in times.iter().enumerate() {
                    let pts = curve(
                        &g,
                        Quantity::Total,
                        |r| r.h_r == h && r.t_over_tbar.unwrap_or(r.t) == t,
                        |r| r.beta_db.unwrap(),
                        &f,
                    );
                    if pts.is_empty() {
                        continue;
                    }
                    let style = line_style(hi, dashes[ti % dashes.len()]);
                    svg.polyline(&pts, &style);
                    let when = match r0.t_over_tbar {
                        Some(_) => format!("t = {}T̄", fmt_num(t)),
                        None => format!("t = {} s", fmt_num(t)),
                    };
                    legend.push((format!("H_R={} m, {when}", fmt_num(h)), style));
                }
            }
            // The direct link does not depend on the relays; draw it once.
            let first_h = heights.first().copied().unwrap_or(0.0);
            let first_t = times.first().copied().unwrap_or(0.0);
            let pts = curve(
                &g,
                Quantity::DirectLink,
                |r| r.h_r == first_h && r.t_over_tbar.unwrap_or(r.t) == first_t,
                |r| r.beta_db.unwrap(),
                &f,
            );
            if !pts.is_empty() {
                let style = stroke("black", Some("6,4"));
                svg.polyline(&pts, &style);
                legend.push(("direct link".into(), style));
            }
            svg.axes(&f, "β [dB]", "coverage probability");
            svg.legend(&legend);
            (format!("cp_vs_beta{}.svg", suffix(i, n)), svg.finish())
        })
        .collect()
}

fn curve(
    rows: &[&ResultRow],
    quantity: Quantity,
    select: impl Fn(&ResultRow) -> bool,
    x: impl Fn(&ResultRow) -> f64,
    f: &Frame,
) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.quantity == quantity && select(r))
        .map(|r| (x(r), r.value().unwrap()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.into_iter().map(|(x, y)| (f.px(x), f.py(y))).collect()
}

/// Second-hop and two-hop coverage against `t/T̄`, one curve per altitude.
fn cp_vs_time(rows: &[ResultRow]) -> Vec<(String, String)> {
    let wanted = [Quantity::SecondHop, Quantity::RelayLink];
    let usable = rows
        .iter()
        .filter(|r| wanted.contains(&r.quantity) && r.t_over_tbar.is_some() && r.value().is_some());
    let groups = group_by(usable, |r| {
        (
            r.scheme,
            r.v.to_bits(),
            r.lambda_r.to_bits(),
            r.lambda_t.to_bits(),
            r.beta_db.map(f64::to_bits),
        )
    });
    let groups: Vec<_> = groups
        .into_iter()
        .filter(|(_, g)| distinct(g.iter().map(|r| r.t_over_tbar.unwrap())).len() >= 2)
        .collect();
    let n = groups.len();
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (_, g))| {
            let ts = distinct(g.iter().map(|r| r.t_over_tbar.unwrap()));
            let f = Frame {
                x: Axis::new(&ts, false),
                y: Axis {
                    lo: 0.0,
                    hi: 1.0,
                    log: false,
                },
            };
            let r0 = g[0];
            let mut svg = Svg::new(&format!(
                "Coverage over time, β = {} dB",
                r0.beta_db.map(fmt_num).unwrap_or_default()
            ));
            let heights = distinct(g.iter().map(|r| r.h_r));
            let mut legend = Vec::new();
            for (hi, &h) in heights.iter().enumerate() {
                for (q, dash, label) in [
                    (Quantity::SecondHop, None, "second hop"),
                    (Quantity::RelayLink, Some("6,4"), "two hops"),
                ] {
                    let pts = curve(&g, q, |r| r.h_r == h, |r| r.t_over_tbar.unwrap(), &f);
                    if pts.is_empty() {
                        continue;
                    }
                    let style = line_style(hi, dash);
                    svg.polyline(&pts, &style);
                    legend.push((format!("H_R={} m, {label}", fmt_num(h)), style));
                }
            }
            svg.axes(&f, "t / T̄", "coverage probability");
            svg.legend(&legend);
            (format!("cp_vs_time{}.svg", suffix(i, n)), svg.finish())
        })
        .collect()
}

//! Minimal static SVG charts. Coordinates are printed with two decimals so
//! the bytes depend only on the data.

use std::fmt::Write;

use crate::format::g6;
use crate::stats::{FiveNumber, KdeCurve};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        Canvas { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="black"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "" } else { " " });
        }
        let _ = writeln!(
            self.out,
            r#"<polyline points="{d}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#
        );
    }

    fn no_data(mut self) -> String {
        self.text(W / 2.0, H / 2.0, "middle", "no data");
        self.finish()
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map of [lo, hi] onto the plot's vertical extent (high values up).
struct YScale {
    lo: f64,
    hi: f64,
}

impl YScale {
    fn new(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let pad = 0.05 * (hi - lo);
        YScale { lo: lo - pad, hi: hi + pad }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (H - TOP - BOTTOM) * (1.0 - (v - self.lo) / (self.hi - self.lo))
    }

    fn axis(&self, c: &mut Canvas, label: &str) {
        c.line(LEFT, TOP, LEFT, H - BOTTOM, "black");
        c.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black");
        for k in 0..=4 {
            let v = self.lo + (self.hi - self.lo) * k as f64 / 4.0;
            let y = self.y(v);
            c.line(LEFT - 4.0, y, LEFT, y, "black");
            c.text(LEFT - 6.0, y + 4.0, "end", &g6(v));
        }
        let _ = writeln!(
            c.out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            escape(label)
        );
    }
}

/// One box per entry: whiskers at min and max, box at the quartiles.
pub fn boxplot(title: &str, ylabel: &str, entries: &[(String, FiveNumber)]) -> String {
    let mut c = Canvas::new(title);
    if entries.is_empty() {
        return c.no_data();
    }
    let lo = entries.iter().map(|(_, f)| f.min).fold(f64::INFINITY, f64::min);
    let hi = entries.iter().map(|(_, f)| f.max).fold(f64::NEG_INFINITY, f64::max);
    let ys = YScale::new(lo, hi);
    ys.axis(&mut c, ylabel);
    let slot = (W - LEFT - RIGHT) / entries.len() as f64;
    for (i, (name, f)) in entries.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(30.0);
        c.line(cx, ys.y(f.min), cx, ys.y(f.q1), "black");
        c.line(cx, ys.y(f.q3), cx, ys.y(f.max), "black");
        c.line(cx - half / 2.0, ys.y(f.min), cx + half / 2.0, ys.y(f.min), "black");
        c.line(cx - half / 2.0, ys.y(f.max), cx + half / 2.0, ys.y(f.max), "black");
        c.rect(cx - half, ys.y(f.q3), 2.0 * half, ys.y(f.q1) - ys.y(f.q3), PALETTE[i % PALETTE.len()]);
        c.line(cx - half, ys.y(f.median), cx + half, ys.y(f.median), "black");
        c.text(cx, H - BOTTOM + 16.0, "middle", name);
    }
    c.finish()
}

/// Density curves over a shared x range.
pub fn kde(title: &str, xlabel: &str, curves: &[(String, &KdeCurve)]) -> String {
    let mut c = Canvas::new(title);
    let curves: Vec<_> = curves.iter().filter(|(_, k)| !k.x.is_empty()).collect();
    if curves.is_empty() {
        return c.no_data();
    }
    let x_lo = curves.iter().map(|(_, k)| k.x[0]).fold(f64::INFINITY, f64::min);
    let x_hi = curves.iter().map(|(_, k)| k.x[k.x.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    let d_hi = curves
        .iter()
        .flat_map(|(_, k)| k.density.iter().copied())
        .fold(0.0, f64::max);
    let ys = YScale::new(0.0, d_hi);
    ys.axis(&mut c, "density");
    let span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let xm = |x: f64| LEFT + (W - LEFT - RIGHT) * (x - x_lo) / span;
    for k in 0..=4 {
        let v = x_lo + span * k as f64 / 4.0;
        c.text(xm(v), H - BOTTOM + 16.0, "middle", &g6(v));
    }
    c.text(W / 2.0, H - 16.0, "middle", xlabel);
    for (i, (name, k)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = k.x.iter().zip(&k.density).map(|(&x, &d)| (xm(x), ys.y(d))).collect();
        c.polyline(&pts, colour);
        let ly = TOP + 14.0 * i as f64;
        c.line(W - RIGHT - 110.0, ly, W - RIGHT - 90.0, ly, colour);
        c.text(W - RIGHT - 86.0, ly + 4.0, "start", name);
    }
    c.finish()
}

/// Vertical bars with the value printed above each.
pub fn bars(title: &str, ylabel: &str, entries: &[(String, f64)]) -> String {
    let mut c = Canvas::new(title);
    if entries.is_empty() {
        return c.no_data();
    }
    let hi = entries.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let ys = YScale::new(0.0, hi);
    ys.axis(&mut c, ylabel);
    let slot = (W - LEFT - RIGHT) / entries.len() as f64;
    for (i, (name, v)) in entries.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.15;
        c.rect(x, ys.y(*v), slot * 0.7, ys.y(0.0) - ys.y(*v), PALETTE[0]);
        c.text(x + slot * 0.35, ys.y(*v) - 4.0, "middle", &g6(*v));
        let _ = writeln!(
            c.out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" transform="rotate(-45 {:.2} {:.2})">{}</text>"#,
            x + slot * 0.35,
            H - BOTTOM + 12.0,
            x + slot * 0.35,
            H - BOTTOM + 12.0,
            escape(name)
        );
    }
    c.finish()
}

//! Minimal SVG writer. The y axis points up.

use std::fmt::Write;

use puzzlekit::Complex64;

use crate::report::round_sig;

enum Item {
    Path { points: Vec<Complex64>, closed: bool, style: String, title: String },
    Marker { at: Complex64, title: String, color: String },
}

pub struct Svg {
    items: Vec<Item>,
}

fn depth_color(depth: usize) -> String {
    format!("hsl({},70%,50%)", (depth * 47 + 200) % 360)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Svg {
    pub fn new() -> Self {
        Svg { items: Vec::new() }
    }

    pub fn polyline(&mut self, points: &[Complex64], closed: bool, color: &str) {
        self.items.push(Item::Path {
            points: points.to_vec(),
            closed,
            style: format!("fill=\"none\" stroke=\"{color}\""),
            title: String::new(),
        });
    }

    pub fn ray(&mut self, points: &[Complex64], angle: &str) {
        self.items.push(Item::Path {
            points: points.to_vec(),
            closed: false,
            style: "fill=\"none\" stroke=\"#1f77b4\"".into(),
            title: format!("ray {angle}"),
        });
    }

    pub fn piece(&mut self, boundary: &[Complex64], depth: usize, title: &str) {
        let color = depth_color(depth);
        self.items.push(Item::Path {
            points: boundary.to_vec(),
            closed: true,
            style: format!("fill=\"{color}\" fill-opacity=\"0.4\" stroke=\"{color}\""),
            title: title.into(),
        });
    }

    pub fn marker(&mut self, at: Complex64, title: &str, color: &str) {
        self.items.push(Item::Marker {
            at,
            title: title.into(),
            color: color.into(),
        });
    }

    fn bounds(&self) -> (Complex64, Complex64) {
        let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut add = |z: &Complex64| {
            if z.re.is_finite() && z.im.is_finite() {
                lo.re = lo.re.min(z.re);
                lo.im = lo.im.min(z.im);
                hi.re = hi.re.max(z.re);
                hi.im = hi.im.max(z.im);
            }
        };
        for it in &self.items {
            match it {
                Item::Path { points, .. } => points.iter().for_each(&mut add),
                Item::Marker { at, .. } => add(at),
            }
        }
        if !lo.re.is_finite() {
            return (Complex64::new(-2.0, -2.0), Complex64::new(2.0, 2.0));
        }
        (lo, hi)
    }

    pub fn render(&self) -> String {
        let (lo, hi) = self.bounds();
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-12);
        let pad = span * 0.05;
        let (x0, y0) = (lo.re - pad, -hi.im - pad);
        let (w, h) = (hi.re - lo.re + 2.0 * pad, hi.im - lo.im + 2.0 * pad);
        let min_gap = span * 1e-3;
        let fmt = |v: f64| round_sig(v).to_string();
        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="{}" viewBox="{} {} {} {}">"#,
            (800.0 * h / w).round().max(1.0),
            fmt(x0),
            fmt(y0),
            fmt(w),
            fmt(h)
        );
        for it in &self.items {
            match it {
                Item::Path { points, closed, style, title } => {
                    let kept = decimate(points, min_gap);
                    if kept.len() < 2 {
                        continue;
                    }
                    let mut d = String::new();
                    for (i, z) in kept.iter().enumerate() {
                        let _ = write!(d, "{}{} {} ", if i == 0 { 'M' } else { 'L' }, fmt(z.re), fmt(-z.im));
                    }
                    if *closed {
                        d.push('Z');
                    }
                    let _ = write!(
                        out,
                        r#"<path d="{}" {style} stroke-width="1" vector-effect="non-scaling-stroke">"#,
                        d.trim_end()
                    );
                    if !title.is_empty() {
                        let _ = write!(out, "<title>{}</title>", escape(title));
                    }
                    let _ = writeln!(out, "</path>");
                }
                Item::Marker { at, title, color } => {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{}" cy="{}" r="{}" fill="{color}"><title>{}</title></circle>"#,
                        fmt(at.re),
                        fmt(-at.im),
                        fmt(span * 0.006),
                        escape(title)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Drops vertices closer than `gap` to the last kept one.
fn decimate(points: &[Complex64], gap: f64) -> Vec<Complex64> {
    let mut kept: Vec<Complex64> = Vec::new();
    for z in points.iter().filter(|z| z.re.is_finite() && z.im.is_finite()) {
        if kept.last().map_or(true, |l| (z - l).norm() >= gap) {
            kept.push(*z);
        }
    }
    if kept.len() < 3 && points.len() >= 3 {
        return points.to_vec();
    }
    kept
}

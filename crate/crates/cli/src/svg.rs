//! Static SVG plots in the natural chart of the surface.

use std::fmt::Write as _;
use std::path::Path;

use secbill_core::billiard::{center_foci, natural_point, trace_wall, Wall};
use secbill_core::geometry::Vec2;
use secbill_core::{ModelParams, Space};

use crate::output::write_atomic;

const SIZE: f64 = 640.0;
const RAYS: usize = 720;

fn path_data(points: &[Option<Vec2>], map: &impl Fn(Vec2) -> (f64, f64)) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for p in points {
        match p {
            Some(p) => {
                let (x, y) = map(*p);
                let _ = write!(d, "{}{x:.2},{y:.2} ", if pen_down { "L" } else { "M" });
                pen_down = true;
            }
            None => pen_down = false,
        }
    }
    d
}

/// Renders trajectory polylines (standardized points) and walls.
pub fn render(path: &Path, params: &ModelParams, lines: &[Vec<Vec2>], walls: &[Wall]) -> std::io::Result<()> {
    let curves: Vec<Vec<Vec2>> =
        lines.iter().map(|l| l.iter().map(|&q| natural_point(q, params)).filter(|p| p[0].is_finite() && p[1].is_finite()).collect()).collect();
    let foci = center_foci(params);
    let (mut lo, mut hi) = ([foci[0][0].min(foci[1][0]), foci[0][1].min(foci[1][1])], [foci[0][0].max(foci[1][0]), foci[0][1].max(foci[1][1])]);
    for p in curves.iter().flatten() {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-3) * 1.1;
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let map = |p: Vec2| (SIZE * (0.5 + (p[0] - center[0]) / span), SIZE * (0.5 - (p[1] - center[1]) / span));

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if params.space == Space::Hyperbolic {
        let (cx, cy) = map([0.0, 0.0]);
        let _ = writeln!(svg, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#bbb"/>"##, SIZE / span);
    }
    let reach = match params.space {
        Space::Hyperbolic => 2.0,
        _ => 2.0 * span,
    };
    for w in walls {
        let d = path_data(&trace_wall(w, params.space, reach, RAYS), &map);
        let _ = writeln!(svg, r##"<path d="{d}" fill="none" stroke="#c0392b" stroke-width="2"/>"##);
    }
    for c in &curves {
        let pts: Vec<Option<Vec2>> = c.iter().map(|&p| Some(p)).collect();
        let d = path_data(&pts, &map);
        let _ = writeln!(svg, r##"<path d="{d}" fill="none" stroke="#2c3e50" stroke-width="0.8"/>"##);
    }
    for (f, m) in foci.iter().zip([params.m1, params.m2]) {
        let (x, y) = map(*f);
        let fill = if m != 0.0 { "black" } else { "none" };
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{fill}" stroke="black"/>"#);
    }
    svg.push_str("</svg>\n");
    write_atomic(path, &svg)
}

//! SVG rendering of fiber covers for n = 2: radial tube segments of length
//! 2(τ+R) at each center direction, colored by class, with the lattice grid,
//! the window circles, and an optional oracle-disagreement overlay.

use std::collections::BTreeSet;

use crate::cover::TubeCover;
use crate::error::{GeobeamError, Result};
use crate::looping::LoopPartition;

const GOOD_COLOR: &str = "#2e8b57";
const BAD_COLOR: &str = "#ff8c00";
const MISMATCH_COLOR: &str = "#d40000";

/// Options for the fiber diagram.
#[derive(Debug, Clone)]
pub struct SvgOptions {
    /// draw the integer lattice of the universal cover (flat torus figures)
    pub lattice: bool,
    /// circles at these radii (typically t0 and T)
    pub circles: Vec<f64>,
    /// tube indices to highlight as oracle disagreements
    pub mismatches: BTreeSet<usize>,
    pub pixels: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            lattice: false,
            circles: vec![],
            mismatches: BTreeSet::new(),
            pixels: 640.0,
        }
    }
}

/// Render the cover with its partition into an SVG 1.1 document.
pub fn emit_svg(cover: &TubeCover, partition: &LoopPartition, opts: &SvgOptions) -> Result<String> {
    if cover.base_point.len() != 2 {
        return Err(GeobeamError::Unsupported(
            "fiber diagrams are drawn for n = 2 only".into(),
        ));
    }
    let reach = opts
        .circles
        .iter()
        .cloned()
        .fold(1.0_f64, f64::max)
        .max(1.0)
        + 0.6;
    let scale = opts.pixels / (2.0 * reach);
    let cx = opts.pixels / 2.0;
    let cy = opts.pixels / 2.0;
    let px = |x: f64, y: f64| -> (f64, f64) { (cx + scale * x, cy - scale * y) };
    let mut body = String::new();
    if opts.lattice {
        let n = reach.ceil() as i64;
        for p in -n..=n {
            for q in -n..=n {
                if p == 0 && q == 0 {
                    continue;
                }
                let (x, y) = px(p as f64, q as f64);
                body.push_str(&format!(
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"#444\"/>\n"
                ));
            }
        }
    }
    for (k, radius) in opts.circles.iter().enumerate() {
        let color = if k == 0 { "#b8860b" } else { "#1e50ff" };
        body.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            scale * radius
        ));
    }
    // unit fiber circle
    body.push_str(&format!(
        "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.8\"/>\n",
        scale
    ));
    let bad: BTreeSet<usize> = partition.bad.iter().cloned().collect();
    let half = cover.tau + cover.radius;
    for tube in &cover.tubes {
        let ang = tube.center.xi[1].atan2(tube.center.xi[0]);
        let (x0, y0) = px((1.0 - half) * ang.cos(), (1.0 - half) * ang.sin());
        let (x1, y1) = px((1.0 + half) * ang.cos(), (1.0 + half) * ang.sin());
        let color = if bad.contains(&tube.index) {
            BAD_COLOR
        } else {
            GOOD_COLOR
        };
        body.push_str(&format!(
            "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n"
        ));
        if opts.mismatches.contains(&tube.index) {
            let (mx, my) = px(1.12 * ang.cos(), 1.12 * ang.sin());
            body.push_str(&format!(
                "<circle cx=\"{mx:.2}\" cy=\"{my:.2}\" r=\"4\" fill=\"none\" stroke=\"{MISMATCH_COLOR}\" stroke-width=\"2\"/>\n"
            ));
        }
    }
    let (bx, by) = px(0.0, 0.0);
    body.push_str(&format!(
        "<circle cx=\"{bx:.2}\" cy=\"{by:.2}\" r=\"3\" fill=\"#d40000\"/>\n"
    ));
    Ok(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n<rect width=\"{0}\" height=\"{0}\" fill=\"white\"/>\n{body}</svg>\n",
        opts.pixels
    ))
}

//! Deterministic SVG rendering of bundles, cell sets and measures.
//!
//! Coordinates are formatted with fixed precision so identical inputs give
//! byte-identical files. One and two phase dimensions are supported; higher
//! dimensions need an explicit coordinate projection.

use std::fmt::Write as _;
use std::sync::Arc;
use ydyn_core::error::{Error, Result};
use ydyn_core::space::Grid;
use ydyn_core::trajectory::SolutionBundle;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN);
        let sy = HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN);
        (sx, sy)
    }
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
}

fn svg_close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Which phase coordinates a trajectory plot projects onto.
pub fn resolve_projection(dim: usize, proj: Option<&[usize]>) -> Result<(usize, Option<usize>)> {
    match (dim, proj) {
        (1, None) => Ok((0, None)),
        (2, None) => Ok((0, Some(1))),
        (_, Some([a])) if *a < dim => Ok((*a, None)),
        (_, Some([a, b])) if *a < dim && *b < dim => Ok((*a, Some(*b))),
        (d, None) if d > 2 => Err(Error::InvalidDescriptor(format!(
            "phase dimension {d} > 2: pass a projection such as --proj 0,1"
        ))),
        _ => Err(Error::InvalidDescriptor(
            "projection must name one or two in-range coordinates".into(),
        )),
    }
}

/// Trajectories as polylines: time against the coordinate for 1-D
/// projections, phase plane for 2-D.
pub fn plot_bundle(bundle: &SolutionBundle, proj: Option<&[usize]>) -> Result<String> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    let dim = bundle.members()[0].samples()[0].len();
    let (cx, cy) = resolve_projection(dim, proj)?;
    let mut out = String::new();
    svg_open(&mut out);
    let frame = match cy {
        Some(cy) => {
            let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for m in bundle.members() {
                for s in m.samples() {
                    x_lo = x_lo.min(s[cx]);
                    x_hi = x_hi.max(s[cx]);
                    y_lo = y_lo.min(s[cy]);
                    y_hi = y_hi.max(s[cy]);
                }
            }
            Frame {
                x_lo,
                x_hi: x_hi.max(x_lo + 1e-9),
                y_lo,
                y_hi: y_hi.max(y_lo + 1e-9),
            }
        }
        None => {
            let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for m in bundle.members() {
                let (a, b) = m.window();
                t_lo = t_lo.min(a);
                t_hi = t_hi.max(b);
                for s in m.samples() {
                    y_lo = y_lo.min(s[cx]);
                    y_hi = y_hi.max(s[cx]);
                }
            }
            Frame {
                x_lo: t_lo,
                x_hi: t_hi.max(t_lo + 1e-9),
                y_lo,
                y_hi: y_hi.max(y_lo + 1e-9),
            }
        }
    };
    for m in bundle.members() {
        let mut points = String::new();
        for (k, s) in m.samples().iter().enumerate() {
            let (px, py) = match cy {
                Some(cyi) => frame.map(s[cx], s[cyi]),
                None => {
                    let t = (m.start_index() + k as i64) as f64 * m.dt();
                    frame.map(t, s[cx])
                }
            };
            let _ = write!(points, "{},{} ", fmt(px), fmt(py));
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" opacity=\"0.7\"/>",
            points.trim_end()
        );
    }
    svg_close(&mut out);
    Ok(out)
}

fn grid_frame(grid: &Grid) -> Result<Frame> {
    let bounds = grid
        .space()
        .bounds()
        .ok_or_else(|| Error::InvalidDescriptor("finite spaces have no geometric plot".into()))?;
    Ok(match bounds.len() {
        1 => Frame {
            x_lo: bounds[0].0,
            x_hi: bounds[0].1,
            y_lo: 0.0,
            y_hi: 1.0,
        },
        2 => Frame {
            x_lo: bounds[0].0,
            x_hi: bounds[0].1,
            y_lo: bounds[1].0,
            y_hi: bounds[1].1,
        },
        d => {
            return Err(Error::InvalidDescriptor(format!(
                "phase dimension {d} > 2: plot a projected artifact instead"
            )))
        }
    })
}

fn cell_rect(grid: &Grid, frame: &Frame, cell: usize) -> (f64, f64, f64, f64) {
    let multi = grid.unravel(cell);
    let bounds = grid.space().bounds().expect("geometric grid");
    let x = bounds[0].0 + multi[0] as f64 * grid.cell_width(0);
    let w = grid.cell_width(0);
    let (y, h) = if multi.len() > 1 {
        (bounds[1].0 + multi[1] as f64 * grid.cell_width(1), grid.cell_width(1))
    } else {
        (0.0, 1.0)
    };
    let (px, py) = frame.map(x, y + h);
    let (qx, qy) = frame.map(x + w, y);
    (px, py, qx - px, qy - py)
}

/// Cell sets as shaded rectangles; 1-D grids render as a strip.
pub fn plot_cells(grid: &Arc<Grid>, layers: &[(&[usize], &str)]) -> Result<String> {
    let frame = grid_frame(grid)?;
    let mut out = String::new();
    svg_open(&mut out);
    for (cells, color) in layers {
        for &cell in *cells {
            let (x, y, w, h) = cell_rect(grid, &frame, cell);
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" opacity=\"0.6\"/>",
                fmt(x),
                fmt(y),
                fmt(w),
                fmt(h)
            );
        }
    }
    svg_close(&mut out);
    Ok(out)
}

/// Measures as heat maps: shaded rectangles for boxes, an annular ring of
/// segments for one-dimensional tori.
pub fn plot_measure(grid: &Arc<Grid>, weights: &[f64]) -> Result<String> {
    let max_w = weights.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let mut out = String::new();
    svg_open(&mut out);
    if grid.dim() == 1 && grid.space().is_torus() {
        // ring of segments
        let n = grid.cell_count();
        let (cx, cy, r_in, r_out) = (WIDTH / 2.0, HEIGHT / 2.0, 120.0, 180.0);
        for (cell, &w) in weights.iter().enumerate() {
            let a0 = 2.0 * std::f64::consts::PI * cell as f64 / n as f64;
            let a1 = 2.0 * std::f64::consts::PI * (cell + 1) as f64 / n as f64;
            let intensity = (255.0 * (1.0 - w / max_w)) as u8;
            let color = format!("rgb(255,{intensity},{intensity})");
            let (x0, y0) = (cx + r_in * a0.cos(), cy + r_in * a0.sin());
            let (x1, y1) = (cx + r_out * a0.cos(), cy + r_out * a0.sin());
            let (x2, y2) = (cx + r_out * a1.cos(), cy + r_out * a1.sin());
            let (x3, y3) = (cx + r_in * a1.cos(), cy + r_in * a1.sin());
            let _ = writeln!(
                out,
                "<path d=\"M {} {} L {} {} A {} {} 0 0 1 {} {} L {} {} A {} {} 0 0 0 {} {} Z\" fill=\"{color}\"/>",
                fmt(x0), fmt(y0), fmt(x1), fmt(y1),
                fmt(r_out), fmt(r_out), fmt(x2), fmt(y2),
                fmt(x3), fmt(y3),
                fmt(r_in), fmt(r_in), fmt(x0), fmt(y0),
            );
        }
        svg_close(&mut out);
        return Ok(out);
    }
    let frame = grid_frame(grid)?;
    for (cell, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let intensity = (255.0 * (1.0 - w / max_w)) as u8;
        let color = format!("rgb(255,{intensity},{intensity})");
        let (x, y, wd, h) = cell_rect(grid, &frame, cell);
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
            fmt(x),
            fmt(y),
            fmt(wd),
            fmt(h)
        );
    }
    svg_close(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ydyn_core::space::SpaceDescriptor;
    use ydyn_core::trajectory::{Provenance, Trajectory};

    #[test]
    fn projection_rules() {
        assert_eq!(resolve_projection(1, None).unwrap(), (0, None));
        assert_eq!(resolve_projection(2, None).unwrap(), (0, Some(1)));
        assert!(resolve_projection(3, None).is_err());
        assert_eq!(resolve_projection(3, Some(&[0, 2])).unwrap(), (0, Some(2)));
        assert!(resolve_projection(3, Some(&[0, 5])).is_err());
    }

    #[test]
    fn bundle_plot_is_deterministic() {
        let space = Arc::new(SpaceDescriptor::boxed(vec![(0.0, 1.0)]).unwrap());
        let m = Trajectory::new(space.clone(), 0.1, 0, vec![vec![0.1], vec![0.5], vec![0.9]])
            .unwrap();
        let bundle = SolutionBundle::new(
            space,
            0.1,
            vec![m],
            Provenance::new("p", 0, (0.0, 0.2)),
        )
        .unwrap();
        let a = plot_bundle(&bundle, None).unwrap();
        let b = plot_bundle(&bundle, None).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn ring_heat_map_for_circle_measures() {
        let grid = Arc::new(Grid::new(SpaceDescriptor::circle(), vec![10]).unwrap());
        let svg = plot_measure(&grid, &[0.1; 10]).unwrap();
        assert!(svg.contains("<path"));
    }
}

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ProjectError;
use crate::scalar::Real;

/// 2-D coordinates with a class label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D<T> {
    pub coords: Vec<[T; 2]>,
    pub labels: Vec<u8>,
    pub kl_divergence: f64,
}

const COLORS: [&str; 2] = ["#4477aa", "#ee6677"];
const NAMES: [&str; 2] = ["non-mover", "mover"];
const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

fn check(p: &Projection2D<impl Real>) -> Result<(), ProjectError> {
    if p.coords.len() != p.labels.len() {
        return Err(ProjectError::Dimension(format!("{} points but {} labels", p.coords.len(), p.labels.len())));
    }
    if let Some(i) = p.labels.iter().position(|&l| l > 1) {
        return Err(ProjectError::Dimension(format!("label {} at point {i} is not 0 or 1", p.labels[i])));
    }
    Ok(())
}

pub fn write_scatter_csv<T: Real>(p: &Projection2D<T>, path: &Path) -> Result<(), ProjectError> {
    check(p)?;
    let io = |source| ProjectError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "x,y,label").map_err(io)?;
    for (c, l) in p.coords.iter().zip(&p.labels) {
        writeln!(w, "{},{},{l}", c[0], c[1]).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Standalone SVG: one circle per point, legend entries only for the labels
/// that occur.
pub fn write_scatter_svg<T: Real>(p: &Projection2D<T>, path: &Path) -> Result<(), ProjectError> {
    check(p)?;
    let io = |source| ProjectError::Io { path: path.to_path_buf(), source };
    let xs = p.coords.iter().map(|c| c[0].as_f64());
    let ys = p.coords.iter().map(|c| c[1].as_f64());
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;

    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    )
    .map_err(io)?;
    writeln!(w, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").map_err(io)?;
    // non-movers first so the minority class is drawn on top
    for class in 0..2u8 {
        writeln!(w, "<g fill=\"{}\" fill-opacity=\"0.6\">", COLORS[class as usize]).map_err(io)?;
        for (c, _) in p.coords.iter().zip(&p.labels).filter(|(_, &l)| l == class) {
            let cx = MARGIN + (c[0].as_f64() - x0) * scale;
            let cy = SIZE - MARGIN - (c[1].as_f64() - y0) * scale;
            writeln!(w, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\"/>").map_err(io)?;
        }
        writeln!(w, "</g>").map_err(io)?;
    }
    let present: BTreeSet<u8> = p.labels.iter().copied().collect();
    for (row, class) in present.iter().enumerate() {
        let y = 20.0 + 18.0 * row as f64;
        writeln!(
            w,
            "<g class=\"legend-item\"><circle cx=\"20\" cy=\"{y}\" r=\"5\" fill=\"{}\"/><text x=\"30\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text></g>",
            COLORS[*class as usize],
            y + 4.0,
            NAMES[*class as usize]
        )
        .map_err(io)?;
    }
    writeln!(w, "</svg>").map_err(io)?;
    w.flush().map_err(io)
}

/// Writes `<stem>.csv` and, when `svg` is set, `<stem>.svg` next to it.
pub fn export_scatter<T: Real>(p: &Projection2D<T>, csv_path: &Path, svg: bool) -> Result<(), ProjectError> {
    write_scatter_csv(p, csv_path)?;
    if svg {
        write_scatter_svg(p, &csv_path.with_extension("svg"))?;
    }
    Ok(())
}
